//! The curve segment neighborhood graph: one node per segment, one edge per
//! neighbor relation, weighted by proximity and flow alignment.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve_model::{Dataset, SegmentAttributes};
use crate::geom::angle_between;
use crate::segment_index::{IndexError, NeighborQueryResult, Radius, SegmentDistanceMetric, SegmentKdTree, DEFAULT_BUCKET_SIZE};

pub const GRAPH_MAGIC: &[u8; 8] = b"CSNG-GR1";

/// Lower clamp on the alignment factor of an edge weight.
pub const ANGLE_FLOOR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("dataset has not been decomposed into segments")]
    NotDecomposed,
    #[error("invalid graph parameters: {0}")]
    InvalidParams(String),
    #[error("malformed graph file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directedness {
    Directed,
    Undirected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NeighborMethod {
    Knn { k: usize },
    Rbn { radius: Radius },
}

impl fmt::Display for NeighborMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborMethod::Knn { k } => write!(f, "knn(k={k})"),
            NeighborMethod::Rbn { radius: Radius::Absolute(r) } => write!(f, "rbn(r={r})"),
            NeighborMethod::Rbn { radius: Radius::Fraction(r) } => write!(f, "rbn(r={r}·diag)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub method: NeighborMethod,
    pub metric: SegmentDistanceMetric,
    /// Distance scale of the weight decay; defaults to the mean neighbor distance.
    pub d_scale: Option<f64>,
    pub bucket_size: usize,
    /// Caps the worker threads of the neighbor search.
    pub threads: Option<usize>,
}

impl BuildOptions {
    pub fn knn(k: usize) -> Self {
        Self {
            method: NeighborMethod::Knn { k },
            metric: SegmentDistanceMetric::Longest,
            d_scale: None,
            bucket_size: DEFAULT_BUCKET_SIZE,
            threads: None,
        }
    }

    pub fn rbn(radius: Radius) -> Self {
        Self { method: NeighborMethod::Rbn { radius }, ..Self::knn(1) }
    }

    pub fn with_metric(mut self, metric: SegmentDistanceMetric) -> Self {
        self.metric = metric;
        self
    }
}

/// Parameters a graph was built with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub method: NeighborMethod,
    pub metric: SegmentDistanceMetric,
    pub span: usize,
    pub d_scale: f64,
    /// Resolved absolute radius for RBN builds.
    pub radius: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsngEdge {
    pub target: usize,
    pub distance: f64,
    /// Angle between the two segments' chord directions, in `[0, π]`.
    pub angle_diff: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Csng {
    pub node_count: usize,
    /// Per-node segment attributes; empty for graphs read back from edge files.
    pub node_attrs: Vec<SegmentAttributes>,
    /// Out-edges per node, sorted by target id.
    pub adjacency: Vec<Vec<CsngEdge>>,
    pub directedness: Directedness,
    pub params: Option<BuildParams>,
}

/// `exp(-distance / d_scale) · max((1 + cos angle) / 2, 0.01)`, clamped into `(0, 1]`.
pub fn edge_weight(distance: f64, angle_diff: f64, d_scale: f64) -> f64 {
    let decay = (-distance / d_scale).exp();
    let align = ((1.0 + angle_diff.cos()) * 0.5).max(ANGLE_FLOOR);
    (decay * align).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Builds the graph by running a neighbor query for every segment.
pub fn build_csng(ds: &Dataset, opts: &BuildOptions) -> Result<Csng, GraphError> {
    let span = ds.span.ok_or(GraphError::NotDecomposed)?;
    if ds.segments.is_empty() {
        return Err(GraphError::NotDecomposed);
    }
    let radius = match opts.method {
        NeighborMethod::Knn { k: 0 } => return Err(GraphError::InvalidParams("K must be >= 1".into())),
        NeighborMethod::Knn { .. } => None,
        NeighborMethod::Rbn { radius } => {
            let r = radius.resolve(ds.bounds_diagonal);
            if !(r > 0.0 && r.is_finite()) {
                return Err(GraphError::InvalidParams(format!("radius must be > 0, got {r}")));
            }
            Some(r)
        }
    };
    if let Some(s) = opts.d_scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(GraphError::InvalidParams(format!("d_scale must be > 0, got {s}")));
        }
    }
    let tree = SegmentKdTree::build(&ds.segments, opts.bucket_size)?;
    let run = || -> Result<Vec<NeighborQueryResult>, IndexError> {
        (0..ds.segments.len())
            .into_par_iter()
            .map(|q| match (opts.method, radius) {
                (NeighborMethod::Knn { k }, _) => tree.knn(q, k, opts.metric),
                (_, Some(r)) => tree.rbn(q, r, opts.metric),
                _ => unreachable!("radius resolved for RBN"),
            })
            .collect()
    };
    let results = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| GraphError::InvalidParams(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let (sum, count) = results
        .iter()
        .flat_map(|r| r.neighbors.iter())
        .fold((0.0, 0usize), |(s, c), n| (s + n.distance, c + 1));
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let d_scale = opts.d_scale.unwrap_or(if mean > 0.0 { mean } else { 1.0 });

    let adjacency = results
        .into_iter()
        .map(|r| {
            let src = &ds.segments[r.query_id];
            let mut edges: Vec<CsngEdge> = r
                .neighbors
                .into_iter()
                .map(|n| {
                    let angle_diff = angle_between(src.chord_dir, ds.segments[n.id].chord_dir);
                    CsngEdge {
                        target: n.id,
                        distance: n.distance,
                        angle_diff,
                        weight: edge_weight(n.distance, angle_diff, d_scale),
                    }
                })
                .collect();
            edges.sort_by_key(|e| e.target);
            edges
        })
        .collect();

    Ok(Csng {
        node_count: ds.segments.len(),
        node_attrs: ds
            .segments
            .iter()
            .map(|s| SegmentAttributes {
                arc_length: s.arc_length,
                total_curvature: s.total_curvature,
                mean_speed: s.mean_speed,
            })
            .collect(),
        adjacency,
        directedness: match opts.method {
            NeighborMethod::Knn { .. } => Directedness::Directed,
            NeighborMethod::Rbn { .. } => Directedness::Undirected,
        },
        params: Some(BuildParams { method: opts.method, metric: opts.metric, span, d_scale, radius }),
    })
}

impl Csng {
    /// Number of stored (directed) adjacency entries.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Number of graph edges: adjacency entries, halved for undirected graphs.
    pub fn logical_edge_count(&self) -> usize {
        match self.directedness {
            Directedness::Directed => self.edge_count(),
            Directedness::Undirected => self.edge_count() / 2,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, &CsngEdge)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(src, es)| es.iter().map(move |e| (src, e)))
    }

    pub fn edge(&self, src: usize, dst: usize) -> Option<&CsngEdge> {
        let es = self.adjacency.get(src)?;
        es.binary_search_by_key(&dst, |e| e.target).ok().map(|i| &es[i])
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// True when every edge has a reverse twin with identical attributes.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(src, e)| {
            self.edge(e.target, src).is_some_and(|r| {
                r.distance == e.distance && r.angle_diff == e.angle_diff && r.weight == e.weight
            })
        })
    }

    /// Undirected view: `w(u,v) = w(u→v) + w(v→u)`; undirected graphs are returned unchanged.
    pub fn symmetrized_view(&self) -> Csng {
        if self.directedness == Directedness::Undirected {
            return self.clone();
        }
        let mut adjacency: Vec<Vec<CsngEdge>> = vec![Vec::new(); self.node_count];
        for (src, e) in self.edges() {
            let reverse = self.edge(e.target, src);
            // each unordered pair is emitted once, from its smaller endpoint or its only direction
            if reverse.is_some() && src > e.target {
                continue;
            }
            let weight = e.weight + reverse.map_or(0.0, |r| r.weight);
            let merged = CsngEdge { weight, ..*e };
            adjacency[src].push(merged);
            adjacency[e.target].push(CsngEdge { target: src, ..merged });
        }
        for es in &mut adjacency {
            es.sort_by_key(|e| e.target);
        }
        Csng {
            node_count: self.node_count,
            node_attrs: self.node_attrs.clone(),
            adjacency,
            directedness: Directedness::Undirected,
            params: self.params.clone(),
        }
    }

    // ---- edge files ----

    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "src,dst,distance,angle,weight")?;
        for (src, e) in self.edges() {
            writeln!(w, "{src},{},{},{},{}", e.target, e.distance, e.angle_diff, e.weight)?;
        }
        w.flush()
    }

    pub fn write_binary(&self, w: impl Write) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(GRAPH_MAGIC)?;
        w.write_all(&(self.node_count as u32).to_le_bytes())?;
        w.write_all(&(self.edge_count() as u64).to_le_bytes())?;
        for (src, e) in self.edges() {
            w.write_all(&(src as u32).to_le_bytes())?;
            w.write_all(&(e.target as u32).to_le_bytes())?;
            w.write_all(&(e.distance as f32).to_le_bytes())?;
            w.write_all(&(e.angle_diff as f32).to_le_bytes())?;
            // keep tiny weights representable as positive f32
            w.write_all(&(e.weight as f32).max(f32::MIN_POSITIVE).to_le_bytes())?;
        }
        w.flush()
    }

    pub fn export(&self, path: impl AsRef<Path>, format: GraphFormat) -> Result<(), GraphError> {
        let path = path.as_ref();
        let file = fs::File::create(path)?;
        match format.resolve(path) {
            GraphFormat::Csv => self.write_csv(file)?,
            _ => self.write_binary(file)?,
        }
        Ok(())
    }

    pub fn import(path: impl AsRef<Path>, format: GraphFormat) -> Result<Csng, GraphError> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        match format.resolve(path) {
            GraphFormat::Csv => Self::read_csv(&bytes[..], None),
            _ => Self::read_binary(&bytes[..]),
        }
    }

    /// Reads a CSV edge list. CSV carries no node count, so isolated trailing
    /// nodes are only recovered when `node_count` is given.
    pub fn read_csv(r: impl Read, node_count: Option<usize>) -> Result<Csng, GraphError> {
        let mut lines = io::BufReader::new(r).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "src,dst,distance,angle,weight" {
            return Err(GraphError::Malformed(format!("unexpected CSV header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(GraphError::Malformed(format!("row {}: expected 5 fields", i + 1)));
            }
            let bad = |_| GraphError::Malformed(format!("row {}: bad number", i + 1));
            let src: usize = f[0].trim().parse().map_err(|_| GraphError::Malformed(format!("row {}: bad id", i + 1)))?;
            let dst: usize = f[1].trim().parse().map_err(|_| GraphError::Malformed(format!("row {}: bad id", i + 1)))?;
            let distance: f64 = f[2].trim().parse().map_err(bad)?;
            let angle_diff: f64 = f[3].trim().parse().map_err(bad)?;
            let weight: f64 = f[4].trim().parse().map_err(bad)?;
            rows.push((src, CsngEdge { target: dst, distance, angle_diff, weight }));
        }
        let n = rows
            .iter()
            .map(|(s, e)| s.max(&e.target) + 1)
            .max()
            .unwrap_or(0)
            .max(node_count.unwrap_or(0));
        Self::from_rows(n, rows)
    }

    pub fn read_binary(mut r: impl Read) -> Result<Csng, GraphError> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != GRAPH_MAGIC {
            return Err(GraphError::Malformed("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        read_exact(&mut r, &mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        read_exact(&mut r, &mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        let mut rows = Vec::with_capacity(m.min(1 << 26));
        let mut rec = [0u8; 20];
        for _ in 0..m {
            read_exact(&mut r, &mut rec)?;
            let u32_at = |o: usize| u32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
            let f32_at = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64;
            rows.push((
                u32_at(0) as usize,
                CsngEdge { target: u32_at(4) as usize, distance: f32_at(8), angle_diff: f32_at(12), weight: f32_at(16) },
            ));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(GraphError::Malformed(format!("{} trailing bytes", rest.len())));
        }
        Self::from_rows(n, rows)
    }

    /// Assembles a graph from edge rows; directedness is inferred from symmetry.
    fn from_rows(node_count: usize, rows: Vec<(usize, CsngEdge)>) -> Result<Csng, GraphError> {
        let mut adjacency: Vec<Vec<CsngEdge>> = vec![Vec::new(); node_count];
        for (src, e) in rows {
            if src >= node_count || e.target >= node_count {
                return Err(GraphError::Malformed(format!("edge {src}->{} exceeds node count {node_count}", e.target)));
            }
            if src == e.target {
                return Err(GraphError::Malformed(format!("self-loop on node {src}")));
            }
            if !(e.weight > 0.0) {
                return Err(GraphError::Malformed(format!("non-positive weight on edge {src}->{}", e.target)));
            }
            adjacency[src].push(e);
        }
        for (src, es) in adjacency.iter_mut().enumerate() {
            es.sort_by_key(|e| e.target);
            if es.windows(2).any(|w| w[0].target == w[1].target) {
                return Err(GraphError::Malformed(format!("duplicate edge from node {src}")));
            }
        }
        let mut g = Csng {
            node_count,
            node_attrs: Vec::new(),
            adjacency,
            directedness: Directedness::Directed,
            params: None,
        };
        if g.edge_count() > 0 && g.is_symmetric() {
            g.directedness = Directedness::Undirected;
        }
        Ok(g)
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), GraphError> {
    r.read_exact(buf)
        .map_err(|_| GraphError::Malformed("unexpected end of file".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GraphFormat {
    #[default]
    Auto,
    Csv,
    Binary,
}

impl GraphFormat {
    fn resolve(self, path: &Path) -> GraphFormat {
        match self {
            GraphFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => GraphFormat::Csv,
                _ => GraphFormat::Binary,
            },
            f => f,
        }
    }
}
