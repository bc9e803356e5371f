//! Flow-based autoregressive graph generation.

pub mod error;
pub mod flow;
pub mod graph;
pub mod metrics;
pub mod rgcn;
pub mod rl;
pub mod rng;
pub mod sampler;

pub use error::{FlowError, GraphError};
