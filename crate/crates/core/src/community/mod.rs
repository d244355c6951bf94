//! Louvain community detection and the editable community hierarchy.

mod graph;
mod louvain;
mod tree;

use thiserror::Error;

pub use graph::{modularity, Partition, UndirectedWeightedGraph};
pub use louvain::{louvain, louvain_trials, LouvainResult, DEFAULT_TRIALS};
pub use tree::{
    detect, CommunitiesJson, CommunityNode, CommunityTree, DetectParams, MergeOptions, NodeId, SplitOutcome,
    TreeNodeJson, ROOT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommunityError {
    #[error("graph has zero total edge weight")]
    ZeroWeightGraph,
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("unknown community node {0}")]
    UnknownId(NodeId),
    #[error("unknown segment {0}")]
    UnknownSegment(usize),
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("node {0} holds a single segment")]
    SingletonNode(NodeId),
    #[error("merge needs at least two distinct nodes")]
    TooFewNodes,
    #[error("the root cannot be merged")]
    CannotMergeRoot,
    #[error("nodes {a} and {b} are on different branches (parents {parent_a} and {parent_b})")]
    NotMergeable { a: NodeId, b: NodeId, parent_a: NodeId, parent_b: NodeId },
    #[error("inconsistent community tree: {0}")]
    InconsistentTree(String),
}
