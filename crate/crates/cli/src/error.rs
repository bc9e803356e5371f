use graphaf_core::rl::RlError;
use graphaf_core::{FlowError, GraphError};
use thiserror::Error;

/// Failure classes; each maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Divergence { .. } | FlowError::Graph(GraphError::NaN) => CliError::Numerical(e.to_string()),
            FlowError::Tensor(_) | FlowError::Optim(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<RlError> for CliError {
    fn from(e: RlError) -> Self {
        match e {
            RlError::Flow(f) => f.into(),
            RlError::Divergence { .. } | RlError::NoTrajectories(_) => CliError::Numerical(e.to_string()),
            RlError::Config(_) => CliError::Usage(e.to_string()),
            RlError::Scorer(_) => CliError::Data(e.to_string()),
        }
    }
}
