use graphaf_tensor::{AdamConfig, AdamState, OptimError, Tape, Tensor, Var};
use rayon::prelude::*;

use super::trajectory::{collect_trajectories, SeedPool, Trajectory};
use super::{PropertyScorer, RewardConfig, RlError, StepBaselines};
use crate::error::FlowError;
use crate::flow::{GraphAF, Step};
use crate::graph::{AtomVocab, BondVocab, PrefixGraph};
use crate::rgcn::bind;
use crate::rng::{item_seed, stream_seed};
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub clip_ratio: f64,
    /// Optimizer passes over each collected batch.
    pub epochs: usize,
    pub lr: f64,
    /// Iterations of linear learning-rate warm-up; 0 disables it.
    pub warmup: usize,
    pub baseline_decay: f64,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_ratio: 0.2,
            epochs: 4,
            lr: 1e-3,
            warmup: 0,
            baseline_decay: 0.9,
            adam: AdamConfig::default(),
        }
    }
}

/// Mean clipped surrogate over the actions of one trajectory, recorded on
/// `tape`. `None` when the trajectory has no actions.
fn trajectory_surrogate(
    tape: &mut Tape<'_>,
    vars: &[Var],
    model: &GraphAF,
    tr: &Trajectory,
    baselines: &StepBaselines,
    clip: Option<f64>,
) -> Result<Option<Var>, RlError> {
    if tr.actions.is_empty() {
        return Ok(None);
    }
    let steps: Vec<Step> = tr.actions.iter().map(|a| a.step).collect();
    let prefixes: Vec<&PrefixGraph> = tr.actions.iter().map(|a| &a.prefix).collect();
    let sv = model.step_vars(tape, vars, &steps, &prefixes)?;
    let (mut node_pos, mut edge_pos) = (0, 0);
    let mut terms = Vec::with_capacity(tr.actions.len());
    for a in &tr.actions {
        let ((mu, alpha), row) = match a.step {
            Step::Node(_) => {
                node_pos += 1;
                (sv.node.expect("node rows"), node_pos - 1)
            }
            Step::Edge(..) => {
                edge_pos += 1;
                (sv.edge.expect("edge rows"), edge_pos - 1)
            }
        };
        let mu = tape.slice_rows(mu, row, 1)?;
        let alpha = tape.slice_rows(alpha, row, 1)?;
        let alpha = tape.scale(alpha, tr.temperature);
        let lp = tape.argmax_log_prob(mu, alpha, a.category)?;
        let old = tape.constant(Tensor::scalar(a.logp_old));
        let diff = tape.sub(lp, old)?;
        let ratio = tape.exp(diff);
        let advantage = tr.returns[a.t] - baselines.get(a.t);
        let term = match clip {
            None => tape.scale(ratio, advantage),
            Some(c) => {
                let plain = tape.scale(ratio, advantage);
                let clipped = tape.clamp(ratio, 1.0 - c, 1.0 + c);
                let clipped = tape.scale(clipped, advantage);
                tape.minimum(plain, clipped)?
            }
        };
        terms.push(term);
    }
    let total = tape.add_n(&terms)?;
    Ok(Some(tape.scale(total, 1.0 / terms.len() as f64)))
}

/// Negated mean over trajectories of the per-trajectory mean surrogate
/// `min(r * A, clip(r) * A)`, with `r` the probability ratio against the
/// collecting policy and `A = G_t - b_t`. `clip = None` gives the plain
/// `r * A` objective.
pub fn ppo_loss_on_tape(
    tape: &mut Tape<'_>,
    vars: &[Var],
    model: &GraphAF,
    trajectories: &[Trajectory],
    baselines: &StepBaselines,
    clip: Option<f64>,
) -> Result<Var, RlError> {
    let mut parts = Vec::new();
    for tr in trajectories {
        if let Some(s) = trajectory_surrogate(tape, vars, model, tr, baselines, clip)? {
            parts.push(s);
        }
    }
    if parts.is_empty() {
        return Err(RlError::Config("no actions to optimize".into()));
    }
    let total = tape.add_n(&parts)?;
    Ok(tape.scale(total, -1.0 / parts.len() as f64))
}

/// Loss value and per-entry gradients of [`ppo_loss_on_tape`], one tape per
/// trajectory in parallel, merged in trajectory order.
pub fn ppo_gradients(
    model: &GraphAF,
    trajectories: &[Trajectory],
    baselines: &StepBaselines,
    clip: Option<f64>,
) -> Result<(f64, Vec<Option<Tensor>>), RlError> {
    let used = trajectories
        .iter()
        .filter(|t| !t.actions.is_empty())
        .count();
    if used == 0 {
        return Err(RlError::Config("no actions to optimize".into()));
    }
    let scale = -1.0 / used as f64;
    let results = trajectories
        .par_iter()
        .filter(|t| !t.actions.is_empty())
        .map(|tr| -> Result<(f64, Vec<Option<Tensor>>), RlError> {
            let mut tape = Tape::new();
            let vars = bind(&mut tape, model.store());
            let s = trajectory_surrogate(&mut tape, &vars, model, tr, baselines, clip)?
                .expect("non-empty");
            let loss = tape.scale(s, scale);
            let grads = tape.backward(loss)?;
            let per = model
                .store()
                .entries()
                .iter()
                .zip(&vars)
                .map(|(e, &v)| {
                    if e.trainable {
                        grads.get(v).cloned()
                    } else {
                        None
                    }
                })
                .collect();
            Ok((tape.value(loss).item(), per))
        })
        .collect::<Vec<_>>();
    let mut loss = 0.0;
    let mut grads: Vec<Option<Tensor>> = vec![None; model.store().len()];
    for r in results {
        let (l, g) = r?;
        loss += l;
        for (acc, g) in grads.iter_mut().zip(g) {
            match (acc.as_mut(), g) {
                (Some(a), Some(g)) => a.add_in_place(&g)?,
                (None, Some(g)) => *acc = Some(g),
                _ => {}
            }
        }
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub ppo: PpoConfig,
    pub reward: RewardConfig,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            batch_size: 64,
            ppo: PpoConfig::default(),
            reward: RewardConfig::default(),
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FinetuneReport {
    /// Mean final reward of each iteration's batch.
    pub reward_trace: Vec<f64>,
    /// Mean property score of each iteration's batch.
    pub score_trace: Vec<f64>,
    /// Surrogate loss before the first update of each iteration.
    pub loss_trace: Vec<f64>,
    /// Episodes dropped because scoring failed.
    pub failures: usize,
}

/// Policy-gradient fine-tuning: each iteration samples a batch with the
/// current policy, then takes `ppo.epochs` Adam steps on the clipped
/// surrogate. Step baselines are refreshed after the updates. Batch-norm
/// statistics stay frozen.
pub fn finetune(
    model: &mut GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    cfg: &FinetuneConfig,
    scorer: &dyn PropertyScorer,
    seeds: Option<&SeedPool<'_>>,
) -> Result<FinetuneReport, RlError> {
    if cfg.batch_size == 0 || cfg.ppo.epochs == 0 {
        return Err(RlError::Config(
            "batch size and ppo epochs must be positive".into(),
        ));
    }
    if !(cfg.ppo.clip_ratio > 0.0 && cfg.ppo.clip_ratio < 1.0) {
        return Err(RlError::Config(format!(
            "clip ratio must be in (0, 1), got {}",
            cfg.ppo.clip_ratio
        )));
    }
    if !(cfg.ppo.lr >= 0.0 && cfg.ppo.lr.is_finite()) {
        return Err(RlError::Config(format!("learning rate must be non-negative, got {}", cfg.ppo.lr)));
    }
    cfg.sampler.validate()?;
    let mut adam = AdamState::for_store(cfg.ppo.adam, model.store());
    let mut baselines = StepBaselines::new(cfg.ppo.baseline_decay);
    let base = stream_seed(cfg.seed, "finetune");
    let mut report = FinetuneReport::default();
    for it in 0..cfg.iterations {
        let warm = if cfg.ppo.warmup == 0 {
            1.0
        } else {
            ((it + 1) as f64 / cfg.ppo.warmup as f64).min(1.0)
        };
        let lr = cfg.ppo.lr * warm;
        adam.set_lr(lr);
        let collected = collect_trajectories(
            model,
            vocab,
            bonds,
            &cfg.sampler,
            &cfg.reward,
            scorer,
            cfg.batch_size,
            item_seed(base, it as u64),
            seeds,
        )?;
        report.failures += collected.failures;
        let trajs = collected.trajectories;
        if trajs.is_empty() {
            return Err(RlError::NoTrajectories(it));
        }
        let n = trajs.len() as f64;
        report
            .reward_trace
            .push(trajs.iter().map(|t| t.final_reward).sum::<f64>() / n);
        report
            .score_trace
            .push(trajs.iter().map(|t| t.score).sum::<f64>() / n);
        for epoch in 0..cfg.ppo.epochs {
            let (loss, grads) = ppo_gradients(model, &trajs, &baselines, Some(cfg.ppo.clip_ratio))?;
            if !loss.is_finite() {
                return Err(RlError::Divergence {
                    iteration: it,
                    detail: format!("loss {loss} in epoch {epoch}"),
                });
            }
            if epoch == 0 {
                report.loss_trace.push(loss);
            }
            if lr == 0.0 {
                continue;
            }
            adam.step_store(model.store_mut(), &grads)
                .map_err(|e| match e {
                    OptimError::NonFiniteGradient(name) => RlError::Divergence {
                        iteration: it,
                        detail: format!("non-finite gradient for {name}"),
                    },
                    other => RlError::Flow(FlowError::Optim(other)),
                })?;
        }
        baselines.update(&trajs);
    }
    Ok(report)
}
