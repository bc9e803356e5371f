use std::collections::HashMap;
use std::fmt;

use crate::graph::MolecularGraph;

const ROUNDS: usize = 3;

fn mix(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 33)
}

fn combine(h: u64, v: u64) -> u64 {
    mix(h ^ v
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(h << 6)
        .wrapping_add(h >> 2))
}

/// Node labels after each refinement round (round 0 = atom type).
///
/// Round `r` hashes the previous label with the sorted multiset of
/// `(edge category, neighbor label)` pairs.
pub fn wl_labels(g: &MolecularGraph, rounds: usize) -> Vec<Vec<u64>> {
    let n = g.n();
    let mut out = Vec::with_capacity(rounds + 1);
    out.push(
        (0..n)
            .map(|i| mix(g.node_type(i) as u64 + 1))
            .collect::<Vec<_>>(),
    );
    for _ in 0..rounds {
        let prev = out.last().expect("round 0 exists");
        let next = (0..n)
            .map(|i| {
                let mut nb: Vec<(u64, u64)> = g
                    .neighbors(i)
                    .map(|j| (g.edge(i, j) as u64, prev[j]))
                    .collect();
                nb.sort_unstable();
                nb.iter()
                    .fold(combine(prev[i], nb.len() as u64), |h, &(c, l)| {
                        combine(combine(h, c), l)
                    })
            })
            .collect();
        out.push(next);
    }
    out
}

/// Isomorphism-invariant digest of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphDigest(pub u64);

impl fmt::Display for GraphDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Three rounds of neighborhood refinement folded into one digest. Equal
/// digests do not imply isomorphism; see [`IsoClasses`].
pub fn canonical_hash(g: &MolecularGraph) -> GraphDigest {
    let labels = wl_labels(g, ROUNDS);
    let mut h = combine(mix(g.n() as u64), g.bonds().len() as u64);
    for round in &labels {
        let mut sorted = round.clone();
        sorted.sort_unstable();
        h = sorted.iter().fold(h, |h, &l| combine(h, l));
    }
    GraphDigest(h)
}

/// Exact isomorphism test (node types and edge categories must match) by
/// backtracking over refinement-compatible candidates.
pub fn is_isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    if a.n() != b.n() || a.bond_types() != b.bond_types() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let (la, lb) = (wl_labels(a, ROUNDS), wl_labels(b, ROUNDS));
    let (ca, cb) = (&la[ROUNDS], &lb[ROUNDS]);
    let mut sa = ca.clone();
    let mut sb = cb.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return false;
    }
    // match rarest colors first
    let mut freq: HashMap<u64, usize> = HashMap::new();
    for &c in ca {
        *freq.entry(c).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..a.n()).collect();
    order.sort_by_key(|&u| (freq[&ca[u]], u));
    let mut map = vec![usize::MAX; a.n()];
    let mut used = vec![false; b.n()];
    extend(a, b, ca, cb, &order, 0, &mut map, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &MolecularGraph,
    b: &MolecularGraph,
    ca: &[u64],
    cb: &[u64],
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&u) = order.get(depth) else {
        return true;
    };
    for v in 0..b.n() {
        if used[v] || ca[u] != cb[v] || a.node_type(u) != b.node_type(v) {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&w| a.edge(u, w) == b.edge(v, map[w]));
        if !consistent {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if extend(a, b, ca, cb, order, depth + 1, map, used) {
            return true;
        }
        used[v] = false;
        map[u] = usize::MAX;
    }
    false
}

/// Isomorphism classes, bucketed by digest and confirmed exactly.
#[derive(Debug, Clone, Default)]
pub struct IsoClasses {
    buckets: HashMap<GraphDigest, Vec<(usize, MolecularGraph)>>,
    count: usize,
}

impl IsoClasses {
    pub fn new() -> Self {
        Self::default()
    }

    /// Class id of `g`, and whether it was new.
    pub fn insert(&mut self, g: &MolecularGraph) -> (usize, bool) {
        if let Some(id) = self.find(g) {
            return (id, false);
        }
        let id = self.count;
        self.count += 1;
        self.buckets
            .entry(canonical_hash(g))
            .or_default()
            .push((id, g.clone()));
        (id, true)
    }

    pub fn find(&self, g: &MolecularGraph) -> Option<usize> {
        self.buckets
            .get(&canonical_hash(g))?
            .iter()
            .find(|(_, rep)| is_isomorphic(rep, g))
            .map(|(id, _)| *id)
    }

    pub fn contains(&self, g: &MolecularGraph) -> bool {
        self.find(g).is_some()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}
