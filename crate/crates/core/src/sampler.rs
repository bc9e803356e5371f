//! Autoregressive generation with valency-constrained rejection, and exact
//! encode/decode reconstruction.

use std::fmt::{self, Write as _};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::FlowError;
use crate::flow::{forward_transform, window_start, Conditional, GraphAF, Step};
use crate::graph::{
    argmax, check_valency, dequantize, AtomVocab, BondVocab, MolecularGraph, PrefixGraph,
};
use crate::rng::item_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub max_size: usize,
    pub window: usize,
    pub valency_check: bool,
    pub max_resample: usize,
    /// Scales the base noise; 0 gives greedy decoding of the means.
    pub temperature: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            max_size: 16,
            window: 12,
            valency_check: true,
            max_resample: 100,
            temperature: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Dimension(m.to_string()));
        if self.max_size == 0 {
            return bad("max_size must be at least 1");
        }
        if self.max_resample == 0 {
            return bad("max_resample must be at least 1");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxSize,
    /// The newest node got no bonds and was discarded.
    NoBonds,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::MaxSize => "max-size",
            Termination::NoBonds => "no-bonds",
        })
    }
}

/// One generation action.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: Step,
    /// Nodes in the state the action was taken from.
    pub prefix_size: usize,
    /// Noise of the accepted (or last rejected) draw.
    pub eps: Vec<f64>,
    pub category: usize,
    /// Rejected valency-violating proposals before acceptance or fallback.
    pub resamples: usize,
    /// Whether the category was forced to no-edge after `max_resample` rejections.
    pub fallback: bool,
    pub cond: Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    /// Nodes that came from a seed graph rather than from sampling.
    pub seed_nodes: usize,
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
}

impl SampleTrace {
    pub fn rejections(&self) -> usize {
        self.steps.iter().map(|s| s.resamples).sum()
    }

    /// Line-oriented dump.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        for t in &self.steps {
            let what = match t.step {
                Step::Node(i) => format!("node {i}"),
                Step::Edge(i, j) => format!("edge {i} {j}"),
            };
            let _ = writeln!(
                s,
                "{what} prefix={} category={} resamples={}{} eps=[{}] mu=[{}] alpha=[{}]",
                t.prefix_size,
                t.category,
                t.resamples,
                if t.fallback { " fallback" } else { "" },
                list(&t.eps),
                list(&t.cond.mu),
                list(&t.cond.alpha),
            );
        }
        let _ = writeln!(s, "end {}", self.termination);
        s
    }
}

fn check_vocab(model: &GraphAF, vocab: &AtomVocab, bonds: &BondVocab) -> Result<(), FlowError> {
    let c = model.config();
    if c.atom_types != vocab.len() || c.bond_types != bonds.len() {
        return Err(FlowError::Dimension(format!(
            "model is d={}, b={} but vocabularies are d={}, b={}",
            c.atom_types,
            c.bond_types,
            vocab.len(),
            bonds.len()
        )));
    }
    Ok(())
}

fn draw<R: Rng + ?Sized>(width: usize, temperature: f64, rng: &mut R) -> Vec<f64> {
    (0..width)
        .map(|_| temperature * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Samples one molecule from scratch.
pub fn sample_molecule<R: Rng + ?Sized>(
    model: &GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(MolecularGraph, SampleTrace), FlowError> {
    sample_from(model, vocab, bonds, cfg, None, rng)
}

/// Continues generation from `seed` (or from nothing).
///
/// Edge proposals that break a valence are redrawn up to `max_resample`
/// times, then replaced by no-edge. Generation stops at `max_size` nodes or
/// when a node other than the very first gets no bonds; that node is dropped.
pub fn sample_from<R: Rng + ?Sized>(
    model: &GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    cfg: &SamplerConfig,
    seed: Option<&MolecularGraph>,
    rng: &mut R,
) -> Result<(MolecularGraph, SampleTrace), FlowError> {
    cfg.validate()?;
    check_vocab(model, vocab, bonds)?;
    let no_edge = bonds.no_edge();
    let mut g = seed
        .cloned()
        .unwrap_or_else(|| MolecularGraph::new(Vec::new(), bonds.len()));
    let mut trace = SampleTrace {
        seed_nodes: g.n(),
        steps: Vec::new(),
        termination: Termination::MaxSize,
    };
    while g.n() < cfg.max_size {
        let i = g.n();
        let step = Step::Node(i);
        let cond = model.step_conditional(&PrefixGraph::nodes(&g, i), step)?;
        let eps = draw(vocab.len(), cfg.temperature, rng);
        let t = argmax(&forward_transform(&eps, &cond.mu, &cond.alpha))?;
        g.push_node(t);
        trace.steps.push(TraceStep {
            step,
            prefix_size: i,
            eps,
            category: t,
            resamples: 0,
            fallback: false,
            cond,
        });
        let mut bonded = false;
        for j in window_start(i, cfg.window)..i {
            let step = Step::Edge(i, j);
            let cond = model.step_conditional(&PrefixGraph::edge_step(&g, i, j), step)?;
            let mut resamples = 0;
            let (eps, c, fallback) = loop {
                let eps = draw(bonds.categories(), cfg.temperature, rng);
                let c = argmax(&forward_transform(&eps, &cond.mu, &cond.alpha))?;
                if !cfg.valency_check || c == no_edge || check_valency(&g, vocab, bonds, i, j, c) {
                    break (eps, c, false);
                }
                resamples += 1;
                // with zero temperature every redraw repeats the same proposal
                if resamples >= cfg.max_resample || cfg.temperature == 0.0 {
                    break (eps, no_edge, true);
                }
            };
            g.set_edge(i, j, c);
            bonded |= c != no_edge;
            trace.steps.push(TraceStep {
                step,
                prefix_size: i + 1,
                eps,
                category: c,
                resamples,
                fallback,
                cond,
            });
        }
        if i > 0 && !bonded {
            g = g.prefix(i);
            trace.termination = Termination::NoBonds;
            break;
        }
    }
    Ok((g, trace))
}

/// `count` independent samples; sample `k` uses its own stream derived from `seed`.
pub fn sample_batch(
    model: &GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    cfg: &SamplerConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<(MolecularGraph, SampleTrace)>, FlowError> {
    (0..count)
        .into_par_iter()
        .map(|k| sample_molecule(model, vocab, bonds, cfg, &mut item_rng(seed, k as u64)))
        .collect()
}

/// Dequantizes `g`, maps it to latent noise and decodes it back.
pub fn reconstruct<R: Rng + ?Sized>(
    model: &GraphAF,
    g: &MolecularGraph,
    window: usize,
    rng: &mut R,
) -> Result<MolecularGraph, FlowError> {
    let z = dequantize(g, model.config().atom_types, rng);
    let latent = model.inverse(&z, window)?;
    Ok(model.decode(&latent)?.0)
}
