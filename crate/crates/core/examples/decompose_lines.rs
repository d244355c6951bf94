// Cut polylines into fixed-span curve segments and glue them back together.

use csng::prelude::*;

pub fn run_example() -> Result<(), csng::Error> {
    let mut ds = csng::synthetic::random_walks(5, 11, 10.0, 3);
    ds.decompose(4)?;
    // 10 edges per line at span 4: 4 + 4 + 2
    println!("{} segments from {} lines", ds.segments.len(), ds.lines.len());
    for s in ds.segments.iter().take(3) {
        println!(
            "segment {} of line {}: {} points, length {:.3}, curvature {:.3}",
            s.id,
            s.line_id,
            s.point_count(),
            s.arc_length,
            s.total_curvature
        );
    }
    let rebuilt = ds.reconstruct_lines();
    assert!(rebuilt.iter().zip(&ds.lines).all(|(r, l)| *r == l.vertices));

    let doc = ds.to_segments_json()?;
    let again = Dataset::from_segments_json(doc)?;
    assert_eq!(again.segments.len(), ds.segments.len());
    Ok(())
}

fn main() -> Result<(), csng::Error> {
    run_example()
}
