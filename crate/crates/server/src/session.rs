//! Per-session pipeline state and the replayable operations that mutate it.
//!
//! Every successful mutation bumps the generation by one and appends the
//! operation to the audit log; replaying the log on a fresh session rebuilds
//! the same state. Operations are computed on copies and committed at the
//! end, so a failed request leaves the session untouched.

use std::time::Instant;

use csng::baseline_cluster::{compare, run_baseline, BaselineError, BaselineParams, DEFAULT_RESAMPLE};
use csng::community::{detect, CommunitiesJson, CommunityError, CommunityTree, MergeOptions, NodeId, SplitOutcome};
use csng::csng_graph::{build_csng, Csng, Directedness, GraphError};
use csng::curve_model::{CurveError, Dataset, JsonLines};
use csng::field_tracer::{trace, TraceConfig, TraceError};
use csng::geom::Aabb;
use csng::layout_engine::{
    aggregate, run_to_convergence, CompoundGraph, LayoutError, LayoutJson, LayoutParams, LayoutState,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::inputs::{parse_field, GraphRequest, InputError};

pub const DEFAULT_MAX_SEGMENTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown community node {0}")]
    UnknownNode(NodeId),
    #[error("unknown segment {0}")]
    UnknownSegment(usize),
    #[error("stale generation: request expected {expected}, session is at {current}")]
    StaleGeneration { expected: u64, current: u64 },
    #[error("nodes {a} and {b} sit on different branches (parents {parent_a} and {parent_b})")]
    NotMergeable { a: NodeId, b: NodeId, parent_a: NodeId, parent_b: NodeId },
    #[error("{0}")]
    NotReady(String),
    #[error("{0}")]
    Invalid(String),
    #[error("dataset decomposes into {segments} segments, the cap is {max}")]
    TooLarge { segments: usize, max: usize },
    #[error("{0}")]
    Internal(String),
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "UnknownSession",
            SessionError::UnknownNode(_) => "UnknownNode",
            SessionError::UnknownSegment(_) => "UnknownSegment",
            SessionError::StaleGeneration { .. } => "StaleGeneration",
            SessionError::NotMergeable { .. } => "NotMergeable",
            SessionError::NotReady(_) => "NotReady",
            SessionError::Invalid(_) => "InvalidParams",
            SessionError::TooLarge { .. } => "TooLarge",
            SessionError::Internal(_) => "Internal",
        }
    }

    /// Structured fields that accompany the message in error bodies.
    pub fn details(&self) -> Value {
        match *self {
            SessionError::UnknownNode(id) => json!({ "node": id }),
            SessionError::UnknownSegment(id) => json!({ "segment": id }),
            SessionError::StaleGeneration { expected, current } => json!({ "expected": expected, "current": current }),
            SessionError::NotMergeable { a, b, parent_a, parent_b } => {
                json!({ "a": a, "b": b, "parent_a": parent_a, "parent_b": parent_b })
            }
            SessionError::TooLarge { segments, max } => json!({ "segments": segments, "max": max }),
            _ => json!({}),
        }
    }
}

impl From<CommunityError> for SessionError {
    fn from(e: CommunityError) -> Self {
        match e {
            CommunityError::UnknownId(id) => SessionError::UnknownNode(id),
            CommunityError::UnknownSegment(s) => SessionError::UnknownSegment(s),
            CommunityError::NotMergeable { a, b, parent_a, parent_b } => {
                SessionError::NotMergeable { a, b, parent_a, parent_b }
            }
            CommunityError::InconsistentTree(m) => SessionError::Internal(m),
            other => SessionError::Invalid(other.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for SessionError {
            fn from(e: $t) -> Self {
                SessionError::Invalid(e.to_string())
            }
        }
    )*};
}
invalid_from!(CurveError, TraceError, GraphError, BaselineError, InputError);

impl From<LayoutError> for SessionError {
    fn from(e: LayoutError) -> Self {
        SessionError::Internal(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRequest {
    /// Field name or grid file, as accepted by [`parse_field`].
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Aabb>,
    pub cfg: TraceConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Lines(JsonLines),
    Trace(TraceRequest),
}

/// A state-changing request, as recorded in the audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Dataset {
        source: DatasetSource,
    },
    Decompose {
        #[serde(rename = "L", alias = "span")]
        span: usize,
    },
    Graph(GraphRequest),
    Detect {
        resolution: f64,
        seed: u64,
    },
    Split {
        node: NodeId,
        resolution: f64,
        seed: u64,
    },
    Merge {
        node_ids: Vec<NodeId>,
        #[serde(default)]
        allow_lca_merge: bool,
    },
    Collapse {
        node: NodeId,
        collapsed: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Generation the operation produced.
    pub generation: u64,
    #[serde(flatten)]
    pub op: Op,
}

/// Converged layout of the visible communities, plus the state it started from.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutSnapshot {
    pub graph: CompoundGraph,
    pub start: LayoutState,
    pub state: LayoutState,
}

/// What a successful request returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Applied {
    pub generation: u64,
    pub mutated: bool,
    pub body: Value,
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub max_segments: usize,
    pub layout: LayoutParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { max_segments: DEFAULT_MAX_SEGMENTS, layout: LayoutParams::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    config: SessionConfig,
    dataset: Option<Dataset>,
    graph: Option<Csng>,
    tree: Option<CommunityTree>,
    layout: Option<LayoutSnapshot>,
    generation: u64,
    audit: Vec<AuditEntry>,
}

/// Pieces of state an operation replaces; `None` leaves a piece alone.
#[derive(Default)]
struct Staged {
    dataset: Option<Dataset>,
    graph: Option<Option<Csng>>,
    tree: Option<Option<CommunityTree>>,
    layout: Option<Option<LayoutSnapshot>>,
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig) -> Self {
        Self {
            id: id.into(),
            config,
            dataset: None,
            graph: None,
            tree: None,
            layout: None,
            generation: 0,
            audit: Vec::new(),
        }
    }

    /// Rebuilds a session by applying `entries` in order.
    pub fn replay(id: impl Into<String>, config: SessionConfig, entries: &[AuditEntry]) -> Result<Self, SessionError> {
        let mut s = Self::new(id, config);
        for e in entries {
            let applied = s.apply(e.op.clone(), None)?;
            if applied.generation != e.generation {
                return Err(SessionError::Invalid(format!(
                    "audit entry expects generation {}, replay reached {}",
                    e.generation, applied.generation
                )));
            }
        }
        Ok(s)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        self.dataset.as_ref()
    }

    pub fn graph(&self) -> Option<&Csng> {
        self.graph.as_ref()
    }

    pub fn tree(&self) -> Option<&CommunityTree> {
        self.tree.as_ref()
    }

    pub fn layout(&self) -> Option<&LayoutSnapshot> {
        self.layout.as_ref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Applies `op` if the session is at `expected` (when given).
    pub fn apply(&mut self, op: Op, expected: Option<u64>) -> Result<Applied, SessionError> {
        if let Some(expected) = expected.filter(|&e| e != self.generation) {
            return Err(SessionError::StaleGeneration { expected, current: self.generation });
        }
        let next = self.generation + 1;
        let (staged, body) = match self.stage(&op, next)? {
            Some(x) => x,
            None => return Ok(Applied { generation: self.generation, mutated: false, body: json!({ "status": "no_split", "generation": self.generation }) }),
        };
        if let Some(d) = staged.dataset {
            self.dataset = Some(d);
        }
        if let Some(g) = staged.graph {
            self.graph = g;
        }
        if let Some(t) = staged.tree {
            self.tree = t;
        }
        if let Some(l) = staged.layout {
            self.layout = l;
        }
        self.generation = next;
        self.audit.push(AuditEntry { generation: next, op });
        let mut body = body;
        body["generation"] = json!(next);
        Ok(Applied { generation: next, mutated: true, body })
    }

    /// Computes the outcome of `op` without touching `self`. `None` means the
    /// operation succeeded but changes nothing.
    fn stage(&self, op: &Op, next: u64) -> Result<Option<(Staged, Value)>, SessionError> {
        let cleared = |s: Staged| Staged { graph: Some(None), tree: Some(None), layout: Some(None), ..s };
        Ok(Some(match op {
            Op::Dataset { source } => {
                let ds = match source {
                    DatasetSource::Lines(doc) => Dataset::from_json_lines(doc.clone())?,
                    DatasetSource::Trace(req) => {
                        let field = parse_field(&req.field, req.domain)?;
                        trace(&field, &req.cfg)?
                    }
                };
                let body = json!({
                    "lines": ds.lines.len(),
                    "vertices": ds.vertex_count(),
                    "bounds_diagonal": ds.bounds_diagonal,
                });
                (cleared(Staged { dataset: Some(ds), ..Staged::default() }), body)
            }
            Op::Decompose { span } => {
                let mut ds = self.need_dataset()?.clone();
                let segments = csng::curve_model::expected_segment_count(&ds.lines, (*span).max(1));
                if segments > self.config.max_segments {
                    return Err(SessionError::TooLarge { segments, max: self.config.max_segments });
                }
                ds.decompose(*span)?;
                let body = json!({ "segments": ds.segments.len(), "L": span });
                (cleared(Staged { dataset: Some(ds), ..Staged::default() }), body)
            }
            Op::Graph(req) => {
                let ds = self.need_dataset()?;
                if !ds.is_decomposed() {
                    return Err(SessionError::NotReady("decompose the dataset before building a graph".into()));
                }
                let opts = req.to_options()?;
                let t0 = Instant::now();
                let g = build_csng(ds, &opts)?;
                let build_ms = t0.elapsed().as_secs_f64() * 1e3;
                let body = json!({
                    "nodes": g.node_count,
                    "edges": g.logical_edge_count(),
                    "directed": g.directedness == Directedness::Directed,
                    "d_scale": g.params.as_ref().map(|p| p.d_scale),
                    "build_ms": build_ms,
                });
                (Staged { graph: Some(Some(g)), tree: Some(None), layout: Some(None), ..Staged::default() }, body)
            }
            Op::Detect { resolution, seed } => {
                let g = self.need_graph()?;
                let tree = detect(g, *resolution, *seed)?;
                let layout = self.relayout(&tree, g, None, next)?;
                let body = json!({ "tree": tree.to_json() });
                (Staged { tree: Some(Some(tree)), layout: Some(Some(layout)), ..Staged::default() }, body)
            }
            Op::Split { node, resolution, seed } => {
                let g = self.need_graph()?;
                let mut tree = self.need_tree()?.clone();
                let children = match tree.split_node(g, *node, *resolution, *seed)? {
                    SplitOutcome::NoSplit => return Ok(None),
                    SplitOutcome::Split { children } => children,
                };
                let layout = self.relayout(&tree, g, self.layout.as_ref(), next)?;
                let body = json!({ "children": children, "tree": tree.to_json() });
                (Staged { tree: Some(Some(tree)), layout: Some(Some(layout)), ..Staged::default() }, body)
            }
            Op::Merge { node_ids, allow_lca_merge } => {
                let g = self.need_graph()?;
                let mut tree = self.need_tree()?.clone();
                let merged = tree.merge_nodes(node_ids, MergeOptions { allow_lca_merge: *allow_lca_merge })?;
                let layout = self.relayout(&tree, g, self.layout.as_ref(), next)?;
                let body = json!({ "node": merged, "tree": tree.to_json() });
                (Staged { tree: Some(Some(tree)), layout: Some(Some(layout)), ..Staged::default() }, body)
            }
            Op::Collapse { node, collapsed } => {
                let g = self.need_graph()?;
                let mut tree = self.need_tree()?.clone();
                tree.set_collapsed(*node, *collapsed)?;
                let layout = self.relayout(&tree, g, self.layout.as_ref(), next)?;
                let body = json!({ "visible": tree.visible_nodes() });
                (Staged { tree: Some(Some(tree)), layout: Some(Some(layout)), ..Staged::default() }, body)
            }
        }))
    }

    /// Converged layout for `tree`, warm-started from `prev` when given.
    fn relayout(
        &self,
        tree: &CommunityTree,
        g: &Csng,
        prev: Option<&LayoutSnapshot>,
        seed: u64,
    ) -> Result<LayoutSnapshot, SessionError> {
        let params = &self.config.layout;
        let cg = aggregate(tree, g)?;
        let start = match prev {
            Some(p) => LayoutState::warm_start(&cg, &p.state, tree, seed, params),
            None => LayoutState::initial(&cg, seed, params),
        };
        let state = run_to_convergence(&cg, start.clone(), params);
        Ok(LayoutSnapshot { graph: cg, start, state })
    }

    fn need_dataset(&self) -> Result<&Dataset, SessionError> {
        self.dataset.as_ref().ok_or_else(|| SessionError::NotReady("no dataset loaded".into()))
    }

    fn need_graph(&self) -> Result<&Csng, SessionError> {
        self.graph.as_ref().ok_or_else(|| SessionError::NotReady("no graph built".into()))
    }

    pub fn need_tree(&self) -> Result<&CommunityTree, SessionError> {
        self.tree.as_ref().ok_or_else(|| SessionError::NotReady("no communities detected".into()))
    }

    pub fn need_layout(&self) -> Result<&LayoutSnapshot, SessionError> {
        self.layout.as_ref().ok_or_else(|| SessionError::NotReady("no layout yet; detect communities first".into()))
    }

    // ---- reads ----

    pub fn tree_json(&self) -> Result<CommunitiesJson, SessionError> {
        self.need_tree().map(CommunityTree::to_json)
    }

    pub fn layout_json(&self) -> Result<LayoutJson, SessionError> {
        let l = self.need_layout()?;
        Ok(l.state.to_json(&l.graph))
    }

    /// Geometry and leaf membership of the segments under `nodes`, or of all
    /// segments when `nodes` is `None`.
    pub fn segments(&self, nodes: Option<&[NodeId]>) -> Result<Value, SessionError> {
        let ds = self.need_dataset()?;
        if !ds.is_decomposed() {
            return Err(SessionError::NotReady("dataset is not decomposed".into()));
        }
        let ids: Vec<usize> = match nodes {
            None => (0..ds.segments.len()).collect(),
            Some(nodes) => {
                let tree = self.need_tree()?;
                let mut ids = Vec::new();
                for &n in nodes {
                    ids.extend(tree.members_of(n)?);
                }
                ids.sort_unstable();
                ids.dedup();
                ids
            }
        };
        let tree = self.tree.as_ref();
        let segments: Vec<Value> = ids
            .iter()
            .map(|&i| {
                let s = &ds.segments[i];
                let points: Vec<[f64; 3]> = s.points.iter().map(|&p| p.into()).collect();
                json!({
                    "id": s.id,
                    "line_id": s.line_id,
                    "points": points,
                    "community": tree.and_then(|t| t.community_of(i).ok()),
                })
            })
            .collect();
        Ok(json!({ "generation": self.generation, "segments": segments }))
    }

    pub fn community_of(&self, segment: usize) -> Result<NodeId, SessionError> {
        Ok(self.need_tree()?.community_of(segment)?)
    }

    /// PCA + k-means on the current segments, compared with the current leaves.
    pub fn baseline(&self, dim: usize, k: usize, seed: u64, resample: Option<usize>) -> Result<Value, SessionError> {
        let ds = self.need_dataset()?;
        let params = BaselineParams { dim, k, seed, resample: resample.unwrap_or(DEFAULT_RESAMPLE) };
        let r = run_baseline(ds, params)?;
        let ari = match &self.tree {
            Some(t) => Some(compare(&r.assignment, &t.leaf_assignment())?.ari),
            None => None,
        };
        Ok(json!({
            "generation": self.generation,
            "clusters": r.to_clusters_json(),
            "explained_variance": r.explained_variance,
            "ari": ari,
        }))
    }

    /// SHA-256 over the serialized state; equal hashes mean equal sessions.
    pub fn state_hash(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            generation: u64,
            lines: Option<JsonLines>,
            span: Option<usize>,
            graph: Option<&'a Csng>,
            tree: Option<CommunitiesJson>,
            collapsed: Vec<NodeId>,
            layout: Option<(&'a LayoutState, &'a LayoutState)>,
        }
        let view = View {
            generation: self.generation,
            lines: self.dataset.as_ref().map(Dataset::to_json_lines),
            span: self.dataset.as_ref().and_then(|d| d.span),
            graph: self.graph.as_ref(),
            tree: self.tree.as_ref().map(CommunityTree::to_json),
            collapsed: self.tree.as_ref().map_or_else(Vec::new, |t| t.nodes().filter(|n| n.collapsed).map(|n| n.id).collect()),
            layout: self.layout.as_ref().map(|l| (&l.start, &l.state)),
        };
        let bytes = serde_json::to_vec(&view).expect("state serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn summary(&self) -> Value {
        let ds = self.dataset.as_ref();
        json!({
            "session": self.id,
            "generation": self.generation,
            "state_hash": self.state_hash(),
            "lines": ds.map(|d| d.lines.len()),
            "vertices": ds.map(Dataset::vertex_count),
            "segments": ds.filter(|d| d.is_decomposed()).map(|d| d.segments.len()),
            "L": ds.and_then(|d| d.span),
            "graph": self.graph.as_ref().map(|g| json!({
                "nodes": g.node_count,
                "edges": g.logical_edge_count(),
                "directed": g.directedness == Directedness::Directed,
            })),
            "communities": self.tree.as_ref().map(|t| t.leaves().count()),
            "layout": self.layout.as_ref().map(|l| json!({
                "nodes": l.graph.nodes.len(),
                "converged": l.state.converged,
                "iteration": l.state.iteration,
            })),
        })
    }
}
