use csng::field_tracer::{trace, trace_from, AnalyticKind, Seeding, TraceConfig, VectorField};
use csng::geom::{Aabb, Vec3};

fn circular() -> VectorField {
    VectorField::analytic(AnalyticKind::Circular, Aabb::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(2.0, 2.0, 1.0)))
}

fn radial_drift(step: f64, steps: usize) -> f64 {
    let cfg = TraceConfig::new(Seeding::Random { count: 1, seed: 0 }, step, steps);
    let (verts, _) = trace_from(&circular(), Vec3::new(1.0, 0.0, 0.0), &cfg, 1.0);
    assert_eq!(verts.len(), steps + 1);
    let last = verts.last().unwrap();
    (last.x.hypot(last.y) - 1.0).abs()
}

#[test]
fn halving_the_step_shrinks_radial_drift_sixteenfold() {
    for (h, n) in [(0.04, 300), (0.02, 300), (0.05, 200)] {
        let ratio = radial_drift(h, n) / radial_drift(h / 2.0, n);
        assert!((8.0..=32.0).contains(&ratio), "h={h}: ratio {ratio}");
    }
}

#[test]
fn streamlines_of_circular_field_stay_on_their_circle() {
    let cfg = TraceConfig::new(Seeding::UniformGrid { nx: 4, ny: 4, nz: 1 }, 0.01, 600);
    let ds = trace(&circular(), &cfg).unwrap();
    for line in &ds.lines {
        let r0 = line.vertices[0].x.hypot(line.vertices[0].y);
        for v in &line.vertices {
            assert!((v.x.hypot(v.y) - r0).abs() < 1e-4 * r0.max(1.0), "{} vs {r0}", v.x.hypot(v.y));
            assert_eq!(v.z, line.vertices[0].z);
        }
    }
}

#[test]
fn normalized_steps_are_exactly_step_size_apart() {
    let domain = Aabb::new(Vec3::ZERO, Vec3::new(6.0, 6.0, 6.0));
    let field = VectorField::analytic(AnalyticKind::abc_default(), domain);
    for h in [0.1, 0.03] {
        let cfg = TraceConfig::new(Seeding::Random { count: 16, seed: 5 }, h, 200);
        let ds = trace(&field, &cfg).unwrap();
        for line in &ds.lines {
            for w in line.vertices.windows(2) {
                let d = w[0].dist(w[1]);
                assert!(((d - h) / h).abs() <= 1e-9, "spacing {d} vs {h}");
            }
        }
    }
}

#[test]
fn tracing_is_deterministic_for_random_seeding() {
    let domain = Aabb::new(Vec3::ZERO, Vec3::new(6.0, 6.0, 6.0));
    let field = VectorField::analytic(AnalyticKind::abc_default(), domain);
    let cfg = TraceConfig::new(Seeding::Random { count: 32, seed: 9 }, 0.05, 100);
    assert_eq!(trace(&field, &cfg).unwrap().lines, trace(&field, &cfg).unwrap().lines);
}
