//! Integral-curve segment clustering.
//!
//! Polylines are cut into fixed-span curve segments, spatial neighbors are
//! found with a segment k-d tree, and the resulting neighborhood graph is
//! partitioned with Louvain into an editable community hierarchy. A
//! force-directed layout places the visible communities, and a PCA + k-means
//! baseline is available for comparison.
//!
//! ```
//! use csng::prelude::*;
//!
//! let mut ds = csng::synthetic::two_bundles(6, 7).dataset;
//! ds.decompose(4).unwrap();
//! // a radius wider than a bundle but narrower than the gap between them
//! let g = build_csng(&ds, &BuildOptions::rbn(Radius::Absolute(12.0))).unwrap();
//! let tree = detect(&g, 1.0, 0).unwrap();
//! assert_eq!(tree.root().children.len(), 2);
//! ```

pub mod baseline_cluster;
pub mod community;
pub mod csng_graph;
pub mod curve_model;
pub mod field_tracer;
pub mod geom;
pub mod layout_engine;
pub mod segment_index;
pub mod synthetic;

/// JSON Schemas of the JSON file formats.
pub mod schemas {
    pub const LINES: &str = include_str!("../schemas/lines.schema.json");
    pub const SEGMENTS: &str = include_str!("../schemas/segments.schema.json");
    pub const COMMUNITIES: &str = include_str!("../schemas/communities.schema.json");
    pub const CLUSTERS: &str = include_str!("../schemas/clusters.schema.json");
    pub const LAYOUT: &str = include_str!("../schemas/layout.schema.json");

    /// `(name, schema)` pairs, named after the file stem.
    pub const ALL: [(&str, &str); 5] = [
        ("lines", LINES),
        ("segments", SEGMENTS),
        ("communities", COMMUNITIES),
        ("clusters", CLUSTERS),
        ("layout", LAYOUT),
    ];
}

use thiserror::Error;

pub mod prelude {
    pub use crate::baseline_cluster::{compare, featurize, kmeans, pca, run_baseline, BaselineParams};
    pub use crate::community::{detect, louvain, modularity, CommunityTree, MergeOptions, SplitOutcome};
    pub use crate::csng_graph::{build_csng, BuildOptions, Csng, GraphFormat};
    pub use crate::curve_model::{CurveSegment, Dataset, LinesFormat, Polyline};
    pub use crate::field_tracer::{trace, AnalyticKind, Seeding, TraceConfig, VectorField};
    pub use crate::geom::{Aabb, Vec3};
    pub use crate::layout_engine::{aggregate, run_layout, LayoutParams, LayoutState};
    pub use crate::segment_index::{Radius, SegmentDistanceMetric, SegmentKdTree};
}

/// Any error raised by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Curve(#[from] curve_model::CurveError),
    #[error(transparent)]
    Trace(#[from] field_tracer::TraceError),
    #[error(transparent)]
    Index(#[from] segment_index::IndexError),
    #[error(transparent)]
    Graph(#[from] csng_graph::GraphError),
    #[error(transparent)]
    Community(#[from] community::CommunityError),
    #[error(transparent)]
    Layout(#[from] layout_engine::LayoutError),
    #[error(transparent)]
    Baseline(#[from] baseline_cluster::BaselineError),
}
