use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a DAG: cycle through vertices {0:?}")]
    NotADag(Vec<usize>),

    #[error("vertex {vertex} out of range for graph with {d} vertices")]
    VertexOutOfRange { vertex: usize, d: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),

    #[error("invalid weight {weight} on edge {tail} -> {head}")]
    InvalidWeight { tail: usize, head: usize, weight: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dense materialization of d = {d} exceeds cap {cap}")]
    TooLarge { d: usize, cap: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
