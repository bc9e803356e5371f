//! Goal-directed fine-tuning of the flow with a clipped-surrogate policy
//! gradient, and constrained optimization from sub-graph seeds.

mod constrained;
mod ppo;
mod scorer;
mod trajectory;

pub use constrained::{
    graph_similarity, lowest_scoring, optimize_constrained, subgraph_seed, subgraph_seed_with,
    ConstrainedConfig, ConstrainedResult, DeltaOutcome,
};
pub use ppo::{
    finetune, ppo_gradients, ppo_loss_on_tape, FinetuneConfig, FinetuneReport, PpoConfig,
};
pub use scorer::{
    parse_scorer, AtomCount, ExternalScorer, PropertyScorer, RingPenalty, ScorerError,
    TargetAtomFraction,
};
pub use trajectory::{
    collect_trajectories, compute_action_logprob, discounted_returns, Action, Collected, SeedPool,
    Trajectory,
};

use thiserror::Error;

use crate::error::FlowError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("policy update diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },
    #[error("every trajectory in iteration {0} failed to score")]
    NoTrajectories(usize),
}

impl From<graphaf_tensor::TensorError> for RlError {
    fn from(e: graphaf_tensor::TensorError) -> Self {
        RlError::Flow(e.into())
    }
}

/// Maps a property score to a reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardShape {
    /// `t1 * score`
    Linear { t1: f64 },
    /// `exp(score / t2)`
    Exp { t2: f64 },
}

impl RewardShape {
    pub fn apply(self, score: f64) -> f64 {
        match self {
            RewardShape::Linear { t1 } => t1 * score,
            RewardShape::Exp { t2 } => (score / t2).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub shape: RewardShape,
    /// Discount applied to the final reward per earlier node step.
    pub gamma: f64,
    /// Reward per rejected valency-violating proposal.
    pub validity_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            shape: RewardShape::Linear { t1: 1.0 },
            gamma: 0.97,
            validity_penalty: -1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RlError::Config(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if let RewardShape::Exp { t2 } = self.shape {
            if !(t2 > 0.0) {
                return Err(RlError::Config(format!("t2 must be positive, got {t2}")));
            }
        }
        Ok(())
    }
}

/// Moving-average return baseline per node step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBaselines {
    pub values: Vec<Option<f64>>,
    pub decay: f64,
}

impl StepBaselines {
    pub fn new(decay: f64) -> Self {
        Self {
            values: Vec::new(),
            decay,
        }
    }

    /// Baseline for step `t`; 0 before the step was ever observed.
    pub fn get(&self, t: usize) -> f64 {
        self.values.get(t).copied().flatten().unwrap_or(0.0)
    }

    /// Folds in the batch-mean return of every step. A step seen for the
    /// first time takes the batch mean directly.
    pub fn update(&mut self, trajectories: &[Trajectory]) {
        let steps = trajectories
            .iter()
            .map(|t| t.returns.len())
            .max()
            .unwrap_or(0);
        if self.values.len() < steps {
            self.values.resize(steps, None);
        }
        for t in 0..steps {
            // running mean: exact when every return is equal
            let (mut mean, mut count) = (0.0, 0usize);
            for g in trajectories.iter().filter_map(|tr| tr.returns.get(t)) {
                count += 1;
                mean += (g - mean) / count as f64;
            }
            self.values[t] = Some(match self.values[t] {
                None => mean,
                Some(b) => self.decay * b + (1.0 - self.decay) * mean,
            });
        }
    }
}
