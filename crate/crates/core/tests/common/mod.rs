#![allow(dead_code)]

use csng::curve_model::{CurveSegment, Dataset};
use csng::segment_index::{segment_distance, SegmentDistanceMetric};
use csng::synthetic::random_walks;

/// Random-walk dataset cut into roughly `segments` segments of span 4.
pub fn random_segments(segments: usize, seed: u64) -> Dataset {
    let lines = segments / 10;
    let mut ds = random_walks(lines, 41, 100.0, seed);
    ds.decompose(4).unwrap();
    ds
}

/// All other segments by (distance, id), first `k`.
pub fn brute_knn(segs: &[CurveSegment], q: usize, k: usize, metric: SegmentDistanceMetric) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = segs
        .iter()
        .filter(|s| s.id != q)
        .map(|s| (s.id, segment_distance(&segs[q], s, metric)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// All other segments strictly closer than `r`, by (distance, id).
pub fn brute_rbn(segs: &[CurveSegment], q: usize, r: f64, metric: SegmentDistanceMetric) -> Vec<(usize, f64)> {
    let mut all = brute_knn(segs, q, usize::MAX, metric);
    all.retain(|&(_, d)| d < r);
    all
}
