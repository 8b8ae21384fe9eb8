use thiserror::Error;

use crate::graph::NodeId;

/// Errors raised by conversion, modeling and corpus handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("node {0} is a terminal, expected a nonterminal")]
    TerminalNode(NodeId),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("discontinuity removal did not converge after {0} iterations")]
    NonTermination(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("token sequences of gold and predicted graphs differ")]
    TokenMismatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownNode(_) => "unknown_node",
            Error::TerminalNode(_) => "terminal_node",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::InvalidTree(_) => "invalid_tree",
            Error::NonTermination(_) => "non_termination",
            Error::Shape(_) => "shape_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::TokenMismatch => "token_mismatch",
            Error::Config(_) => "config",
            Error::EmptyCorpus => "empty_corpus",
            Error::InfeasibleSpec(_) => "infeasible_spec",
            Error::Checkpoint(_) => "checkpoint",
            Error::Parse(_) => "parse",
            Error::Json { .. } => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
