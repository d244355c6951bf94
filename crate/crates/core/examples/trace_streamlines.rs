// Trace streamlines through the ABC flow and write them as a lines file.
//
// ```bash
// cargo run -p csng --example trace_streamlines
// ```

use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let domain = Aabb::new(Vec3::ZERO, Vec3::new(6.0, 6.0, 6.0));
    let field = VectorField::analytic(AnalyticKind::abc_default(), domain);
    let cfg = TraceConfig::new(Seeding::UniformGrid { nx: 4, ny: 4, nz: 4 }, 0.05, 200);
    let ds = trace(&field, &cfg)?;

    let first = &ds.lines[0];
    let spacing = first.vertices[0].dist(first.vertices[1]);
    println!("{} lines, {} vertices, spacing {spacing:.6}", ds.lines.len(), ds.vertex_count());

    let out = std::env::temp_dir().join("csng-abc-lines.bin");
    ds.save(&out, LinesFormat::Binary)?;
    let back = Dataset::load(&out, LinesFormat::Binary)?;
    assert_eq!(back.lines.len(), ds.lines.len());
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
