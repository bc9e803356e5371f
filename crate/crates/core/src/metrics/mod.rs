//! Evaluation of generated sets: validity, uniqueness, novelty,
//! reconstruction, and MMD over graph statistics.

mod hash;
mod mmd;
mod report;

pub use hash::{canonical_hash, is_isomorphic, wl_labels, GraphDigest, IsoClasses};
pub use mmd::{
    clustering_coefficients, degree_histogram, mmd, mmd_report, MmdEstimator, MmdReport, Statistic,
};
pub use report::{evaluate_set, EvalOptions, GenerationReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty sample set")]
    EmptySet,
    #[error("unbiased MMD needs at least two graphs per set, got {0}")]
    TooFew(usize),
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
}
