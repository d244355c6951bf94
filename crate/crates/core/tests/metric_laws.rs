use csng::geom::Vec3;
use csng::segment_index::{polyline_distance, SegmentDistanceMetric};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use SegmentDistanceMetric::{Average, Longest, Shortest};

fn random_polyline(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let n = rng.random_range(2..=9);
    let mut p = Vec3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * 3.0;
    let mut out = vec![p];
    for _ in 1..n {
        p = p + Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        out.push(p);
    }
    out
}

/// Distance from `p` to `line`, with `line` replaced by `per_edge` samples per edge.
fn sampled_point_distance(p: Vec3, line: &[Vec3], per_edge: usize) -> f64 {
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        for i in 0..=per_edge {
            best = best.min(p.dist(w[0].lerp(w[1], i as f64 / per_edge as f64)));
        }
    }
    best
}

/// Vertex-based Hausdorff distance with the target curves densely sampled.
fn dense_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab = a.iter().map(|&p| sampled_point_distance(p, b, 4000)).fold(0.0, f64::max);
    let ba = b.iter().map(|&q| sampled_point_distance(q, a, 4000)).fold(0.0, f64::max);
    ab.max(ba)
}

#[test]
fn laws_hold_exactly_on_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let a = random_polyline(&mut rng);
        let b = random_polyline(&mut rng);
        let [s, l, m] = [Shortest, Longest, Average].map(|metric| polyline_distance(&a, &b, metric));
        for (metric, d) in [(Shortest, s), (Longest, l), (Average, m)] {
            assert_eq!(d.to_bits(), polyline_distance(&b, &a, metric).to_bits(), "{metric} symmetry");
            assert!(d >= 0.0 && d.is_finite());
            assert_eq!(polyline_distance(&a, &a, metric), 0.0, "{metric} identity");
        }
        assert!(l >= m && m >= s, "ordering {l} {m} {s}");
    }
}

#[test]
fn discrete_hausdorff_matches_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let a = random_polyline(&mut rng);
        let b = random_polyline(&mut rng);
        let exact = polyline_distance(&a, &b, Longest);
        let oracle = dense_hausdorff(&a, &b);
        assert!((exact - oracle).abs() < 1e-3, "{exact} vs {oracle}");
    }
}

#[test]
fn translated_copy_is_at_offset_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let a = random_polyline(&mut rng);
        // shift far along z so that no closer point exists
        let b: Vec<Vec3> = a.iter().map(|&p| p + Vec3::new(0.0, 0.0, 100.0)).collect();
        for metric in SegmentDistanceMetric::ALL {
            let d = polyline_distance(&a, &b, metric);
            assert!(d >= 100.0 - 3.0 * 9.0 && d <= 100.0 + 1e-9, "{metric}: {d}");
        }
    }
}

fn point() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-10.0f64..10.0).prop_map(Vec3::from)
}

proptest! {
    #[test]
    fn laws_hold_for_arbitrary_polylines(
        a in prop::collection::vec(point(), 2..8),
        b in prop::collection::vec(point(), 2..8),
    ) {
        let s = polyline_distance(&a, &b, Shortest);
        let m = polyline_distance(&a, &b, Average);
        let l = polyline_distance(&a, &b, Longest);
        prop_assert!(l >= m && m >= s && s >= 0.0);
        prop_assert_eq!(s.to_bits(), polyline_distance(&b, &a, Shortest).to_bits());
        prop_assert_eq!(m.to_bits(), polyline_distance(&b, &a, Average).to_bits());
        prop_assert_eq!(l.to_bits(), polyline_distance(&b, &a, Longest).to_bits());
        // never above any vertex-to-vertex distance, up to rounding of interior closest points
        let vv = a.iter().flat_map(|p| b.iter().map(move |q| p.dist(*q))).fold(f64::INFINITY, f64::min);
        prop_assert!(s <= vv * (1.0 + 1e-12));
    }
}
