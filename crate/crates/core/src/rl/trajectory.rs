use graphaf_tensor::categorical;
use rand::Rng;
use rayon::prelude::*;

use super::constrained::subgraph_seed_with;
use super::{PropertyScorer, RewardConfig, RlError};
use crate::error::FlowError;
use crate::flow::{GraphAF, Step};
use crate::graph::{AtomVocab, BondVocab, MolecularGraph, PrefixGraph};
use crate::rng::item_rng;
use crate::sampler::{sample_from, SamplerConfig};

/// One decision of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub step: Step,
    pub prefix: PrefixGraph,
    pub category: usize,
    /// Log-probability of `category` under the policy that chose it.
    pub logp_old: f64,
    /// Node step (relative to the seed) this action belongs to.
    pub t: usize,
    pub rejections: usize,
}

/// One generation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub actions: Vec<Action>,
    /// Validity penalty collected at each node step.
    pub penalties: Vec<f64>,
    pub final_reward: f64,
    /// `gamma^(T-1-t) * final_reward + penalties[t]`.
    pub returns: Vec<f64>,
    pub graph: MolecularGraph,
    pub score: f64,
    pub temperature: f64,
    pub seed_nodes: usize,
}

/// Discounted per-step returns `G_t = gamma^(T-1-t) * final_reward + penalties[t]`.
/// The reward part is built by the recursion `c_t = gamma * c_(t+1)`, so it
/// holds exactly; penalties stay at their own step.
pub fn discounted_returns(final_reward: f64, penalties: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; penalties.len()];
    let mut carry = final_reward;
    for t in (0..penalties.len()).rev() {
        out[t] = carry + penalties[t];
        carry *= gamma;
    }
    out
}

/// Log-probability that the flow's transformed Gaussian lands in the argmax
/// region of `category`, at sampling temperature `temperature`.
pub fn compute_action_logprob(
    model: &GraphAF,
    prefix: &PrefixGraph,
    step: Step,
    category: usize,
    temperature: f64,
) -> Result<f64, FlowError> {
    let c = model.step_conditional(prefix, step)?;
    if category >= c.mu.len() {
        return Err(FlowError::Dimension(format!(
            "category {category} of {}",
            c.mu.len()
        )));
    }
    let alpha: Vec<f64> = c.alpha.iter().map(|a| a * temperature).collect();
    Ok(categorical::log_prob_with_grad(&c.mu, &alpha, category).log_prob)
}

/// Molecules to start constrained episodes from.
#[derive(Debug, Clone, Copy)]
pub struct SeedPool<'a> {
    pub molecules: &'a [MolecularGraph],
    /// The number of dropped nodes is uniform on `0..=max_drop`.
    pub max_drop: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    pub trajectories: Vec<Trajectory>,
    /// Episodes dropped because the scorer failed.
    pub failures: usize,
}

#[allow(clippy::too_many_arguments)]
fn episode(
    model: &GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    sampler: &SamplerConfig,
    reward: &RewardConfig,
    scorer: &dyn PropertyScorer,
    seeds: Option<&SeedPool<'_>>,
    rng: &mut impl Rng,
) -> Result<Result<Trajectory, String>, RlError> {
    let (seed_graph, reference) = match seeds {
        Some(pool) if !pool.molecules.is_empty() => {
            let mol = &pool.molecules[rng.random_range(0..pool.molecules.len())];
            let m = rng.random_range(0..=pool.max_drop);
            let reference = match scorer.score(mol) {
                Ok(s) => s,
                Err(e) => return Ok(Err(e.to_string())),
            };
            (
                Some(subgraph_seed_with(mol, m, rng).map_err(FlowError::from)?),
                reference,
            )
        }
        _ => (None, 0.0),
    };
    let (graph, trace) = sample_from(model, vocab, bonds, sampler, seed_graph.as_ref(), rng)?;
    let score = match scorer.score(&graph) {
        Ok(s) => s,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let mut g = seed_graph.unwrap_or_else(|| MolecularGraph::new(Vec::new(), bonds.len()));
    let seed_nodes = trace.seed_nodes;
    let mut actions = Vec::with_capacity(trace.steps.len());
    for ts in &trace.steps {
        let prefix = ts.step.prefix(&g);
        match ts.step {
            Step::Node(_) => {
                g.push_node(ts.category);
            }
            Step::Edge(i, j) => g.set_edge(i, j, ts.category),
        }
        let alpha: Vec<f64> = ts
            .cond
            .alpha
            .iter()
            .map(|a| a * sampler.temperature)
            .collect();
        let logp_old = categorical::log_prob_with_grad(&ts.cond.mu, &alpha, ts.category).log_prob;
        actions.push(Action {
            step: ts.step,
            prefix,
            category: ts.category,
            logp_old,
            t: ts.step.node() - seed_nodes,
            rejections: ts.resamples,
        });
    }
    let steps = actions.last().map_or(0, |a| a.t + 1);
    let mut penalties = vec![0.0; steps];
    for a in &actions {
        penalties[a.t] += reward.validity_penalty * a.rejections as f64;
    }
    let final_reward = reward.shape.apply(score - reference);
    Ok(Ok(Trajectory {
        returns: discounted_returns(final_reward, &penalties, reward.gamma),
        actions,
        penalties,
        final_reward,
        graph,
        score,
        temperature: sampler.temperature,
        seed_nodes,
    }))
}

/// Runs `count` constrained-sampler episodes, episode `k` on its own stream
/// derived from `seed`. With a seed pool, each episode continues from a
/// random sub-graph of a pool molecule and is rewarded for the score change.
#[allow(clippy::too_many_arguments)]
pub fn collect_trajectories(
    model: &GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    sampler: &SamplerConfig,
    reward: &RewardConfig,
    scorer: &dyn PropertyScorer,
    count: usize,
    seed: u64,
    seeds: Option<&SeedPool<'_>>,
) -> Result<Collected, RlError> {
    reward.validate()?;
    if !(sampler.temperature > 0.0) {
        return Err(RlError::Config(
            "policy-gradient episodes need a positive temperature".into(),
        ));
    }
    let episodes = (0..count)
        .into_par_iter()
        .map(|k| {
            episode(
                model,
                vocab,
                bonds,
                sampler,
                reward,
                scorer,
                seeds,
                &mut item_rng(seed, k as u64),
            )
        })
        .collect::<Result<Vec<_>, RlError>>()?;
    let mut out = Collected {
        trajectories: Vec::with_capacity(count),
        failures: 0,
    };
    for e in episodes {
        match e {
            Ok(tr) => out.trajectories.push(tr),
            Err(_) => out.failures += 1,
        }
    }
    Ok(out)
}
