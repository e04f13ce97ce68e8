//! Heterogeneous social graph storage, meta-path filtering, k-hop subgraph
//! extraction, and target-to-target transition probabilities.

mod graph;
mod metapath;
mod subgraph;
mod transition;

pub use graph::{build_graph, Edge, EdgeSpec, EdgeType, HetGraph, Masks, NodeSpec, NodeType};
pub use metapath::{filter_by_metapaths, MetaPath, MetaStep};
pub use subgraph::{extract_subgraph, Subgraph};
pub use transition::{transition_distribution, walk_counts, WALK_COUNT_CAP};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node}: feature dimension {found}, expected {expected}")]
    DimensionMismatch {
        node: u64,
        expected: usize,
        found: usize,
    },
    #[error("node {0} has a non-finite feature")]
    NonFiniteFeature(u64),
    #[error("duplicate node id {0}")]
    DuplicateNode(u64),
    #[error("reference to unknown node {0}")]
    UnknownNode(u64),
    #[error("label on non-user node {0}")]
    LabelOnNonUser(u64),
    #[error("node {node}: label {label} is not 0 or 1")]
    InvalidLabel { node: u64, label: u8 },
    #[error("unknown type name {0:?}")]
    UnknownType(String),
    #[error("malformed meta-path: {0}")]
    MalformedMetaPath(String),
    #[error("subgraph center {0} is not a node")]
    UnknownCenter(usize),
    #[error("subgraph center {0} is not a user")]
    CenterNotUser(usize),
    #[error("target list is empty")]
    EmptyTargets,
    #[error("mask entry {0} is not a labeled target")]
    MaskNotTarget(usize),
    #[error("node {0} appears in more than one mask")]
    MaskOverlap(usize),
}
