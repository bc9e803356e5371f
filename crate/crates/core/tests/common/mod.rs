#![allow(dead_code)]

use graphaf_core::flow::{GraphAF, ModelConfig};
use graphaf_core::graph::{
    bfs_reorder, gen_synthetic_molecules, AtomVocab, BondVocab, MolecularGraph, SynthConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthetic molecules relabeled in a random BFS order.
pub fn bfs_molecules(count: usize, max_atoms: usize, seed: u64) -> Vec<MolecularGraph> {
    let mut r = rng(seed);
    let (v, b) = (AtomVocab::organic(), BondVocab::standard());
    gen_synthetic_molecules(count, max_atoms, &v, &b, &SynthConfig::default(), &mut r)
        .unwrap()
        .into_iter()
        .map(|g| {
            let start = r.random_range(0..g.n());
            bfs_reorder(&g, start, &mut r).unwrap().0
        })
        .collect()
}

/// Organic-vocabulary model moved away from the identity initialization.
pub fn random_model(hidden: usize, scale: f64, seed: u64) -> GraphAF {
    let mut cfg = ModelConfig::new(3, 3);
    cfg.hidden = hidden;
    let mut r = rng(seed);
    let mut m = GraphAF::new(cfg, &mut r).unwrap();
    m.perturb(scale, &mut r);
    m
}
