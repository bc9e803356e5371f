use thiserror::Error;

use graphaf_tensor::{OptimError, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph is disconnected: node {0} is unreachable from the start node")]
    Disconnected(usize),
    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeIndex { index: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate bond between {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("unknown atom symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unknown bond order {0}")]
    UnknownBondOrder(u32),
    #[error("edge category {category} out of range (no-edge index is {no_edge})")]
    EdgeCategory { category: usize, no_edge: usize },
    #[error("atom type {0} out of range")]
    AtomType(usize),
    #[error("atom {atom} carries bond order {total} above its valence {max}")]
    Valency { atom: usize, total: u32, max: u32 },
    #[error("graph has {n} nodes; allowed range is 1..={max}")]
    Size { n: usize, max: usize },
    #[error("NaN in dequantized values")]
    NaN,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("generator gave up after {attempts} attempts: {reason}")]
    GeneratorExhausted { attempts: usize, reason: String },
    #[error("MOLT parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("input graph is not in BFS order (node {0} breaks the discovery order)")]
    NotBfsOrdered(usize),
    #[error("bond ({i}, {j}) lies outside the dependency window {window}")]
    WindowExceeded { i: usize, j: usize, window: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("graph with {n} nodes exceeds max size {max}")]
    TooLarge { n: usize, max: usize },
    #[error("model dimension mismatch: {0}")]
    Dimension(String),
}
