//! Embedding bounded-degree trees in dense graphs.
//!
//! The crate provides the machinery needed to embed trees of linear size in
//! dense host graphs: graph and tree kernels (`graph`, `tree`), unlabelled
//! tree enumeration and uniform sampling (`tree_enum`, `tree_sample`),
//! fine partitions of trees into seeds and microtrees (`partition`),
//! ε-regular pair testing and equitable decompositions (`regularity`),
//! seed and microtree embedding into regular pairs (`embed`), the full
//! three-phase saturation embedding pipeline (`schedule`, `saturation`),
//! extremal host/tree constructions with arithmetic certificates
//! (`constructions`), and an exact tree-containment oracle with
//! conjecture scan harnesses (`oracle`, `scan`, `experiment`).

pub mod bitset;
pub mod constructions;
pub mod embed;
pub mod experiment;
pub mod graph;
pub mod graph6;
pub mod oracle;
pub mod partition;
pub mod regularity;
pub mod rng;
pub mod saturation;
pub mod scan;
pub mod schedule;
pub mod tree;
pub mod tree_enum;
pub mod tree_sample;

pub use bitset::VertexSet;
pub use embed::{greedy_embed, validate_embedding, Embedding};
pub use graph::{Graph, Subgraph, VertexSetPair};
pub use partition::{FinePartition, OneSidedPartition};
pub use regularity::{ClusterGraph, RegularDecomposition};
pub use schedule::ConstantSchedule;
pub use tree::Tree;
