//! Exact segment-to-segment distances and a KD-tree over curve segments that
//! answers K-nearest and fixed-radius neighbor queries.
//!
//! The tree is built over segment box centers with median splits on the
//! widest axis, but every node box covers its segments entirely, so box
//! distances are valid lower bounds for the true segment distance:
//!
//! * longest: `max_{p in query} dist(p, node box)`
//! * shortest / average: `dist(query box, node box)`
//!
//! Results are sorted by `(distance, id)` and never contain the query.

mod metric;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metric::{point_polyline_distance, polyline_distance, SegmentDistanceMetric};

use crate::curve_model::CurveSegment;
use crate::geom::Aabb;

pub const DEFAULT_BUCKET_SIZE: usize = 16;

/// Relative slack applied to lower bounds before pruning, so rounding in the
/// bound never discards a segment that ties the current threshold.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("cannot build an index over zero segments")]
    EmptyInput,
    #[error("segment id {0} is out of range")]
    InvalidId(usize),
    #[error("K must be >= 1")]
    InvalidK,
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
}

pub fn segment_distance(a: &CurveSegment, b: &CurveSegment, metric: SegmentDistanceMetric) -> f64 {
    polyline_distance(&a.points, &b.points, metric)
}

/// Neighbor radius, either absolute or relative to the dataset bounds diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    Absolute(f64),
    Fraction(f64),
}

impl Radius {
    pub fn resolve(self, bounds_diagonal: f64) -> f64 {
        match self {
            Radius::Absolute(r) => r,
            Radius::Fraction(f) => f * bounds_diagonal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborQueryResult {
    pub query_id: usize,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Internal { axis: usize, split: f64, left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct KdNode {
    bounds: Aabb,
    depth: usize,
    kind: NodeKind,
}

/// Per-query counters, plus every pruned node with its bound when requested.
#[derive(Clone, Debug, Default)]
pub struct QueryStats {
    pub visited_nodes: usize,
    pub visited_leaves: usize,
    pub distance_evaluations: usize,
    pub pruned: Vec<PrunedNode>,
    record_pruned: bool,
}

impl QueryStats {
    pub fn recording() -> Self {
        Self { record_pruned: true, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PrunedNode {
    pub node: usize,
    pub lower_bound: f64,
}

/// KD-tree over curve segments. Borrows the segments it indexes.
#[derive(Debug)]
pub struct SegmentKdTree<'a> {
    segments: &'a [CurveSegment],
    nodes: Vec<KdNode>,
    order: Vec<usize>,
    bucket_size: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    distance: f64,
    id: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.distance.total_cmp(&o.distance).then(self.id.cmp(&o.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<'a> SegmentKdTree<'a> {
    pub fn build(segments: &'a [CurveSegment], bucket_size: usize) -> Result<Self, IndexError> {
        if segments.is_empty() {
            return Err(IndexError::EmptyInput);
        }
        let bucket_size = bucket_size.max(1);
        let mut tree = Self {
            segments,
            nodes: Vec::with_capacity(2 * segments.len().div_ceil(bucket_size)),
            order: (0..segments.len()).collect(),
            bucket_size,
        };
        tree.build_node(0, segments.len(), 0);
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let bounds = self.order[start..end]
            .iter()
            .fold(Aabb::empty(), |b, &i| b.union(&self.segments[i].bounds));
        let idx = self.nodes.len();
        self.nodes.push(KdNode { bounds, depth, kind: NodeKind::Leaf { start, end } });
        if end - start <= self.bucket_size {
            return idx;
        }
        let centers = Aabb::from_points(
            self.order[start..end]
                .iter()
                .map(|&i| &self.segments[i].bounds)
                .map(|b| b.center())
                .collect::<Vec<_>>()
                .iter(),
        );
        let ext = centers.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = start + (end - start) / 2;
        let segs = self.segments;
        let key = |i: &usize| (segs[*i].bounds.center().axis(axis), *i);
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| {
            let (ka, ia) = key(a);
            let (kb, ib) = key(b);
            ka.total_cmp(&kb).then(ia.cmp(&ib))
        });
        let split = key(&self.order[mid]).0;
        let left = self.build_node(start, mid, depth + 1);
        let right = self.build_node(mid, end, depth + 1);
        self.nodes[idx].kind = NodeKind::Internal { axis, split, left, right };
        idx
    }

    pub fn segments(&self) -> &'a [CurveSegment] {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn node_bounds(&self, node: usize) -> Aabb {
        self.nodes[node].bounds
    }

    /// Split axis and value of an internal node.
    pub fn node_split(&self, node: usize) -> Option<(usize, f64)> {
        match self.nodes[node].kind {
            NodeKind::Internal { axis, split, .. } => Some((axis, split)),
            NodeKind::Leaf { .. } => None,
        }
    }

    /// Segment ids stored under `node`.
    pub fn node_members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match self.nodes[n].kind {
                NodeKind::Leaf { start, end } => out.extend_from_slice(&self.order[start..end]),
                NodeKind::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Segment ids of every leaf, in tree order.
    pub fn leaves(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Leaf { start, end } => Some(self.order[start..end].to_vec()),
                NodeKind::Internal { .. } => None,
            })
            .collect()
    }

    fn check_query(&self, query_id: usize) -> Result<&'a CurveSegment, IndexError> {
        self.segments.get(query_id).ok_or(IndexError::InvalidId(query_id))
    }

    fn lower_bound(&self, query: &CurveSegment, node: usize, metric: SegmentDistanceMetric) -> f64 {
        let b = &self.nodes[node].bounds;
        match metric {
            SegmentDistanceMetric::Longest => query
                .points
                .iter()
                .map(|&p| b.dist_to_point(p))
                .fold(0.0, f64::max),
            _ => query.bounds.dist_to_box(b),
        }
    }

    pub fn knn(&self, query_id: usize, k: usize, metric: SegmentDistanceMetric) -> Result<NeighborQueryResult, IndexError> {
        self.knn_with_stats(query_id, k, metric, &mut QueryStats::default())
    }

    pub fn knn_with_stats(
        &self,
        query_id: usize,
        k: usize,
        metric: SegmentDistanceMetric,
        stats: &mut QueryStats,
    ) -> Result<NeighborQueryResult, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let query = self.check_query(query_id)?;
        let k = k.min(self.segments.len() - 1);
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            let lb = self.lower_bound(query, 0, metric);
            self.knn_visit(0, lb, query, k, metric, &mut heap, stats);
        }
        let neighbors = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor { id: c.id, distance: c.distance })
            .collect();
        Ok(NeighborQueryResult { query_id, neighbors })
    }

    #[allow(clippy::too_many_arguments)]
    fn knn_visit(
        &self,
        node: usize,
        lb: f64,
        query: &CurveSegment,
        k: usize,
        metric: SegmentDistanceMetric,
        heap: &mut BinaryHeap<Candidate>,
        stats: &mut QueryStats,
    ) {
        if heap.len() == k {
            let worst = heap.peek().expect("heap is full").distance;
            if lb * (1.0 - PRUNE_SLACK) > worst {
                if stats.record_pruned {
                    stats.pruned.push(PrunedNode { node, lower_bound: lb });
                }
                return;
            }
        }
        stats.visited_nodes += 1;
        match self.nodes[node].kind {
            NodeKind::Leaf { start, end } => {
                stats.visited_leaves += 1;
                for &id in &self.order[start..end] {
                    if id == query.id {
                        continue;
                    }
                    stats.distance_evaluations += 1;
                    let c = Candidate { distance: segment_distance(query, &self.segments[id], metric), id };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            NodeKind::Internal { left, right, .. } => {
                let lb_l = self.lower_bound(query, left, metric);
                let lb_r = self.lower_bound(query, right, metric);
                let (first, lb_first, second, lb_second) = if lb_l <= lb_r {
                    (left, lb_l, right, lb_r)
                } else {
                    (right, lb_r, left, lb_l)
                };
                self.knn_visit(first, lb_first, query, k, metric, heap, stats);
                self.knn_visit(second, lb_second, query, k, metric, heap, stats);
            }
        }
    }

    /// All segments strictly closer than `radius` to the query.
    pub fn rbn(&self, query_id: usize, radius: f64, metric: SegmentDistanceMetric) -> Result<NeighborQueryResult, IndexError> {
        self.rbn_with_stats(query_id, radius, metric, &mut QueryStats::default())
    }

    pub fn rbn_with_stats(
        &self,
        query_id: usize,
        radius: f64,
        metric: SegmentDistanceMetric,
        stats: &mut QueryStats,
    ) -> Result<NeighborQueryResult, IndexError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(IndexError::InvalidRadius(radius));
        }
        let query = self.check_query(query_id)?;
        let mut found = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let lb = self.lower_bound(query, node, metric);
            if lb * (1.0 - PRUNE_SLACK) >= radius {
                if stats.record_pruned {
                    stats.pruned.push(PrunedNode { node, lower_bound: lb });
                }
                continue;
            }
            stats.visited_nodes += 1;
            match self.nodes[node].kind {
                NodeKind::Leaf { start, end } => {
                    stats.visited_leaves += 1;
                    for &id in &self.order[start..end] {
                        if id == query.id {
                            continue;
                        }
                        stats.distance_evaluations += 1;
                        let d = segment_distance(query, &self.segments[id], metric);
                        if d < radius {
                            found.push(Candidate { distance: d, id });
                        }
                    }
                }
                NodeKind::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        found.sort_unstable();
        Ok(NeighborQueryResult {
            query_id,
            neighbors: found.into_iter().map(|c| Neighbor { id: c.id, distance: c.distance }).collect(),
        })
    }
}
