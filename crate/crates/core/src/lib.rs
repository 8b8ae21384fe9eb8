//! UCCA semantic graph parsing through constituent trees.
//!
//! Graphs are converted into constituent trees whose labels encode how to
//! undo the conversion (`-remote`, `-ancestor1`, `+`-collapsed unary chains).
//! A span-based top-down parser and a biaffine remote-edge classifier share
//! one BiLSTM encoder and are trained jointly; predicted trees are turned
//! back into full graphs.

pub mod conversion;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod generator;
pub mod graph;
pub mod labels;
pub mod neural;
pub mod par;
pub mod pipeline;
pub mod remote;
pub mod span_parser;
pub mod stats;
pub mod train;
pub mod tree;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeKind, NodeId, Token, UccaGraph};
pub use tree::{ConstituentTree, TreeNode};
