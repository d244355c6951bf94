use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::{point_segment_distance, segment_segment_distance, Vec3};

/// How the distance between two curve segments is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentDistanceMetric {
    /// Closest approach of the two polylines.
    Shortest,
    /// Symmetric discrete Hausdorff distance over the stored vertices.
    #[default]
    Longest,
    /// Mean vertex-to-other-polyline distance over both vertex sets.
    Average,
}

impl SegmentDistanceMetric {
    pub const ALL: [SegmentDistanceMetric; 3] = [Self::Shortest, Self::Longest, Self::Average];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shortest => "shortest",
            Self::Longest => "longest",
            Self::Average => "average",
        }
    }
}

impl fmt::Display for SegmentDistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SegmentDistanceMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shortest" => Ok(Self::Shortest),
            "longest" | "hausdorff" => Ok(Self::Longest),
            "average" => Ok(Self::Average),
            _ => Err(format!("unknown metric {s:?} (expected shortest|longest|average)")),
        }
    }
}

/// Exact distance from `p` to the polyline through `points`.
#[inline]
pub fn point_polyline_distance(p: Vec3, points: &[Vec3]) -> f64 {
    if points.len() == 1 {
        return p.dist(points[0]);
    }
    points
        .windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Distance between two polylines under `metric`.
///
/// The three variants are computed so that symmetry, identity and the
/// ordering `longest >= average >= shortest` hold bit-for-bit, not just up to
/// rounding.
pub fn polyline_distance(a: &[Vec3], b: &[Vec3], metric: SegmentDistanceMetric) -> f64 {
    match metric {
        SegmentDistanceMetric::Shortest => shortest(a, b),
        SegmentDistanceMetric::Longest => {
            let (ha, hb) = directed_maxes(a, b);
            ha.max(hb)
        }
        SegmentDistanceMetric::Average => {
            let (sum_a, max_a) = directed_stats(a, b);
            let (sum_b, max_b) = directed_stats(b, a);
            let mean = (sum_a + sum_b) / (a.len() + b.len()) as f64;
            // the mean is bracketed mathematically; the clamp only absorbs rounding
            mean.min(max_a.max(max_b)).max(shortest(a, b))
        }
    }
}

fn shortest(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for wa in a.windows(2) {
        for wb in b.windows(2) {
            best = best.min(segment_segment_distance(wa[0], wa[1], wb[0], wb[1]));
        }
    }
    // vertex distances bound the true minimum from above; folding them in keeps
    // `shortest <= average` exact and gives d(a, a) = 0 exactly
    for &p in a {
        best = best.min(point_polyline_distance(p, b));
    }
    for &q in b {
        best = best.min(point_polyline_distance(q, a));
    }
    best
}

fn directed_maxes(a: &[Vec3], b: &[Vec3]) -> (f64, f64) {
    let ha = a.iter().map(|&p| point_polyline_distance(p, b)).fold(0.0, f64::max);
    let hb = b.iter().map(|&q| point_polyline_distance(q, a)).fold(0.0, f64::max);
    (ha, hb)
}

fn directed_stats(from: &[Vec3], to: &[Vec3]) -> (f64, f64) {
    from.iter()
        .map(|&p| point_polyline_distance(p, to))
        .fold((0.0, 0.0f64), |(s, mx), d| (s + d, mx.max(d)))
}
