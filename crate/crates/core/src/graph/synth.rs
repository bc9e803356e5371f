use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{AtomVocab, BondVocab, MolecularGraph};
use crate::error::GraphError;

/// Knobs for the synthetic molecule generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Relative frequency of each atom type; `None` gives the first type 0.6
    /// and splits the rest evenly.
    pub type_weights: Option<Vec<f64>>,
    /// Relative frequency of each bond type among those that fit.
    pub bond_weights: Vec<f64>,
    /// Chance of closing a 5- or 6-ring after each added atom.
    pub ring_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            type_weights: None,
            bond_weights: vec![0.7, 0.2, 0.1],
            ring_prob: 0.1,
        }
    }
}

fn default_type_weights(d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.4 / (d - 1) as f64; d];
    w[0] = 0.6;
    w
}

/// Grows `count` connected, valency-respecting molecules of 1..=max_atoms atoms.
///
/// Each new atom attaches to a random atom with free valence through the
/// heaviest bond both sides can hold (drawn by `bond_weights`); growth stops
/// early if every atom is saturated. Nothing is ever rejected.
pub fn gen_synthetic_molecules<R: Rng + ?Sized>(
    count: usize,
    max_atoms: usize,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<Vec<MolecularGraph>, GraphError> {
    if max_atoms == 0 {
        return Err(GraphError::Size { n: 0, max: 0 });
    }
    let tw = cfg
        .type_weights
        .clone()
        .unwrap_or_else(|| default_type_weights(vocab.len()));
    if tw.len() != vocab.len() {
        return Err(GraphError::Dimension {
            expected: vocab.len(),
            got: tw.len(),
        });
    }
    let types = WeightedIndex::new(&tw).map_err(|e| GraphError::Vocab(e.to_string()))?;
    let bw = |k: usize| cfg.bond_weights.get(k).copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.random_range(1..=max_atoms);
        let mut g = MolecularGraph::new(vec![types.sample(rng)], bonds.len());
        let mut free = vec![vocab.valence(g.node_type(0))];
        while g.n() < target {
            let open: Vec<usize> = (0..g.n()).filter(|&i| free[i] > 0).collect();
            if open.is_empty() {
                break;
            }
            let anchor = open[rng.random_range(0..open.len())];
            let t = types.sample(rng);
            let cap = free[anchor].min(vocab.valence(t));
            let fits: Vec<usize> = (0..bonds.len())
                .filter(|&k| bonds.order(k) <= cap)
                .collect();
            let weights: Vec<f64> = fits.iter().map(|&k| bw(k).max(1e-9)).collect();
            let k = fits[WeightedIndex::new(&weights)
                .expect("positive weights")
                .sample(rng)];
            let v = g.push_node(t);
            g.set_edge(anchor, v, k);
            free[anchor] -= bonds.order(k);
            free.push(vocab.valence(t) - bonds.order(k));
            if rng.random::<f64>() < cfg.ring_prob && bonds.order(0) == 1 {
                close_ring(&mut g, &mut free, v, rng);
            }
        }
        out.push(g);
    }
    Ok(out)
}

fn close_ring<R: Rng + ?Sized>(g: &mut MolecularGraph, free: &mut [u32], v: usize, rng: &mut R) {
    if free[v] == 0 {
        return;
    }
    let mut dist = vec![usize::MAX; g.n()];
    dist[v] = 0;
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        for w in g.neighbors(u).collect::<Vec<_>>() {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    let partners: Vec<usize> = (0..g.n())
        .filter(|&u| (dist[u] == 4 || dist[u] == 5) && free[u] > 0)
        .collect();
    if partners.is_empty() {
        return;
    }
    let u = partners[rng.random_range(0..partners.len())];
    g.set_edge(u, v, 0);
    free[u] -= 1;
    free[v] -= 1;
}

/// Two-community random graphs with a single node and edge type. Samples that
/// come out disconnected are redrawn.
pub fn gen_community_graphs<R: Rng + ?Sized>(
    count: usize,
    nodes_per_community: usize,
    p_intra: f64,
    p_inter: f64,
    rng: &mut R,
) -> Result<Vec<MolecularGraph>, GraphError> {
    const MAX_ATTEMPTS: usize = 10_000;
    for p in [p_intra, p_inter] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::Vocab(format!("probability {p} outside [0, 1]")));
        }
    }
    let k = nodes_per_community;
    if k == 0 {
        return Err(GraphError::Size { n: 0, max: 0 });
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let mut g = MolecularGraph::new(vec![0; 2 * k], 1);
            for i in 0..2 * k {
                for j in i + 1..2 * k {
                    let p = if (i < k) == (j < k) { p_intra } else { p_inter };
                    if rng.random::<f64>() < p {
                        g.set_edge(i, j, 0);
                    }
                }
            }
            if g.is_connected() {
                out.push(g);
                break;
            }
            if attempts == MAX_ATTEMPTS {
                return Err(GraphError::GeneratorExhausted {
                    attempts,
                    reason: "no connected sample".into(),
                });
            }
        }
    }
    Ok(out)
}

/// G(n, p) graphs with a single node and edge type, connected or not.
pub fn erdos_renyi_graphs<R: Rng + ?Sized>(
    count: usize,
    n: usize,
    p: f64,
    rng: &mut R,
) -> Vec<MolecularGraph> {
    (0..count)
        .map(|_| {
            let mut g = MolecularGraph::new(vec![0; n], 1);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p {
                        g.set_edge(i, j, 0);
                    }
                }
            }
            g
        })
        .collect()
}
