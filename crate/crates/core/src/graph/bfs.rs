use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::MolecularGraph;
use crate::error::GraphError;

/// A BFS relabeling: `permutation[new] = old`, with per-node depths in the new order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsOrder {
    pub permutation: Vec<usize>,
    pub depths: Vec<usize>,
}

/// Relabels `g` in breadth-first order from `start`.
///
/// Nodes discovered from the same parent are enqueued in a uniformly random
/// order, so every BFS order reachable from `start` has positive probability.
pub fn bfs_reorder<R: Rng + ?Sized>(
    g: &MolecularGraph,
    start: usize,
    rng: &mut R,
) -> Result<(MolecularGraph, BfsOrder), GraphError> {
    let n = g.n();
    if start >= n {
        return Err(GraphError::NodeIndex { index: start, n });
    }
    let mut depth = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([start]);
    depth[start] = 0;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        let mut fresh: Vec<usize> = g.neighbors(u).filter(|&v| depth[v] == usize::MAX).collect();
        fresh.shuffle(rng);
        for v in fresh {
            depth[v] = depth[u] + 1;
            queue.push_back(v);
        }
    }
    if let Some(v) = depth.iter().position(|&d| d == usize::MAX) {
        return Err(GraphError::Disconnected(v));
    }
    let depths = order.iter().map(|&o| depth[o]).collect();
    let relabeled = g.permute(&order);
    Ok((
        relabeled,
        BfsOrder {
            permutation: order,
            depths,
        },
    ))
}

/// Largest `i - j` over bonds of `g` after relabeling by `order`.
pub fn max_dependency_distance(g: &MolecularGraph, order: &BfsOrder) -> usize {
    let mut inverse = vec![0; g.n()];
    for (new, &old) in order.permutation.iter().enumerate() {
        inverse[old] = new;
    }
    g.bonds()
        .into_iter()
        .map(|(a, b, _)| inverse[a].abs_diff(inverse[b]))
        .max()
        .unwrap_or(0)
}

/// Largest `i - j` over bonds of an already ordered graph.
pub fn max_dependency(g: &MolecularGraph) -> usize {
    g.bonds()
        .into_iter()
        .map(|(a, b, _)| b - a)
        .max()
        .unwrap_or(0)
}

/// Checks that node order is a BFS discovery order from node 0.
///
/// Every node `v >= 1` must have an earlier neighbor, and the earliest such
/// neighbor (its BFS parent) must be non-decreasing in `v`. Returns the first
/// offending node.
pub fn is_bfs_ordered(g: &MolecularGraph) -> Result<(), usize> {
    let mut last_parent = 0;
    for v in 1..g.n() {
        match (0..v).find(|&u| g.has_bond(u, v)) {
            Some(p) if p >= last_parent => last_parent = p,
            _ => return Err(v),
        }
    }
    Ok(())
}
