use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use super::{PropertyScorer, RlError};
use crate::error::GraphError;
use crate::flow::GraphAF;
use crate::graph::{bfs_reorder, AtomVocab, BondVocab, MolecularGraph};
use crate::metrics::wl_labels;
use crate::rng::{item_rng, item_seed, stream_seed};
use crate::sampler::{sample_from, SamplerConfig};

const SIMILARITY_ROUNDS: usize = 2;

/// Drops between 0 and `max_drop` trailing nodes of a random BFS order of `g`.
pub fn subgraph_seed<R: Rng + ?Sized>(
    g: &MolecularGraph,
    max_drop: usize,
    rng: &mut R,
) -> Result<MolecularGraph, GraphError> {
    let m = rng.random_range(0..=max_drop);
    subgraph_seed_with(g, m, rng)
}

/// The first `n - m` nodes of a BFS order of `g` from a random start, so the
/// seed is connected and BFS ordered. At least one node is always kept.
pub fn subgraph_seed_with<R: Rng + ?Sized>(
    g: &MolecularGraph,
    m: usize,
    rng: &mut R,
) -> Result<MolecularGraph, GraphError> {
    let n = g.n();
    if n == 0 {
        return Ok(g.clone());
    }
    let keep = n - m.min(n - 1);
    let start = rng.random_range(0..n);
    let (h, _) = bfs_reorder(g, start, rng)?;
    Ok(h.prefix(keep))
}

fn label_histogram(g: &MolecularGraph) -> HashMap<(usize, u64), f64> {
    let mut out = HashMap::new();
    for (round, labels) in wl_labels(g, SIMILARITY_ROUNDS).into_iter().enumerate() {
        for l in labels {
            *out.entry((round, l)).or_insert(0.0) += 1.0;
        }
    }
    out
}

/// Cosine similarity of Weisfeiler-Lehman label counts (rounds 0 to 2).
/// 1 for isomorphic graphs, 0 when no label is shared; two empty graphs
/// count as identical.
pub fn graph_similarity(a: &MolecularGraph, b: &MolecularGraph) -> f64 {
    if a.n() == 0 || b.n() == 0 {
        return if a.n() == b.n() { 1.0 } else { 0.0 };
    }
    let (ha, hb) = (label_histogram(a), label_histogram(b));
    let dot: f64 = ha
        .iter()
        .filter_map(|(k, x)| hb.get(k).map(|y| x * y))
        .sum();
    let na: f64 = ha.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = hb.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedConfig {
    pub samples_per_molecule: usize,
    pub deltas: Vec<f64>,
    pub max_drop: usize,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl Default for ConstrainedConfig {
    fn default() -> Self {
        Self {
            samples_per_molecule: 20,
            deltas: vec![0.0, 0.2, 0.4, 0.6],
            max_drop: 5,
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaOutcome {
    pub delta: f64,
    /// Best score gain among outputs at least `delta` similar; 0 if none.
    pub improvement: f64,
    pub similarity: f64,
    /// Some output was similar enough and scored strictly higher.
    pub success: bool,
    pub best: Option<MolecularGraph>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedResult {
    pub original_score: f64,
    pub outcomes: Vec<DeltaOutcome>,
    /// Outputs the scorer could not score.
    pub failures: usize,
}

/// Indices of the `k` lowest-scoring molecules, ties broken by index.
/// Molecules that fail to score are skipped.
pub fn lowest_scoring(
    molecules: &[MolecularGraph],
    scorer: &dyn PropertyScorer,
    k: usize,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = molecules
        .iter()
        .enumerate()
        .filter_map(|(i, g)| scorer.score(g).ok().map(|s| (s, i)))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// For each molecule, regenerates from `samples_per_molecule` random
/// sub-graph seeds and reports the best improvement under each similarity
/// threshold. Molecule `k` uses its own stream derived from `cfg.seed`.
pub fn optimize_constrained(
    model: &GraphAF,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    molecules: &[MolecularGraph],
    scorer: &dyn PropertyScorer,
    cfg: &ConstrainedConfig,
) -> Result<Vec<ConstrainedResult>, RlError> {
    cfg.sampler.validate()?;
    if let Some(d) = cfg.deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(RlError::Config(format!(
            "similarity threshold {d} outside [0, 1]"
        )));
    }
    let base = stream_seed(cfg.seed, "constrained");
    molecules
        .par_iter()
        .enumerate()
        .map(|(k, mol)| {
            let original_score = scorer.score(mol)?;
            let mol_seed = item_seed(base, k as u64);
            let mut outputs = Vec::with_capacity(cfg.samples_per_molecule);
            let mut failures = 0;
            for s in 0..cfg.samples_per_molecule {
                let mut rng = item_rng(mol_seed, s as u64);
                let seed = subgraph_seed(mol, cfg.max_drop, &mut rng)
                    .map_err(crate::error::FlowError::from)?;
                let (g, _) = sample_from(model, vocab, bonds, &cfg.sampler, Some(&seed), &mut rng)?;
                match scorer.score(&g) {
                    Ok(score) => {
                        outputs.push((graph_similarity(mol, &g), score - original_score, g))
                    }
                    Err(_) => failures += 1,
                }
            }
            let outcomes = cfg
                .deltas
                .iter()
                .map(|&delta| {
                    let best = outputs
                        .iter()
                        .filter(|(sim, _, _)| *sim >= delta)
                        .max_by(|a, b| a.1.total_cmp(&b.1));
                    match best {
                        Some((sim, gain, g)) if *gain > 0.0 => DeltaOutcome {
                            delta,
                            improvement: *gain,
                            similarity: *sim,
                            success: true,
                            best: Some(g.clone()),
                        },
                        _ => DeltaOutcome {
                            delta,
                            improvement: 0.0,
                            similarity: 0.0,
                            success: false,
                            best: None,
                        },
                    }
                })
                .collect();
            Ok(ConstrainedResult {
                original_score,
                outcomes,
                failures,
            })
        })
        .collect()
}
