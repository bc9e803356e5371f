use std::collections::VecDeque;

use crate::error::GraphError;

/// Discrete graph with typed nodes and a dense symmetric edge-category matrix.
///
/// Category `no_edge()` (= number of bond types) marks absent edges and fills
/// the diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MolecularGraph {
    node_types: Vec<usize>,
    edges: Vec<usize>,
    bond_types: usize,
}

impl MolecularGraph {
    /// Graph with the given node types and no edges.
    pub fn new(node_types: Vec<usize>, bond_types: usize) -> Self {
        let n = node_types.len();
        Self {
            node_types,
            edges: vec![bond_types; n * n],
            bond_types,
        }
    }

    /// Builds a graph from `(i, j, category)` triples, rejecting self-loops,
    /// duplicates and out-of-range indices.
    pub fn from_bonds(
        node_types: Vec<usize>,
        bond_types: usize,
        bonds: &[(usize, usize, usize)],
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(node_types, bond_types);
        let n = g.n();
        for &(i, j, c) in bonds {
            for index in [i, j] {
                if index >= n {
                    return Err(GraphError::NodeIndex { index, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if c >= bond_types {
                return Err(GraphError::EdgeCategory {
                    category: c,
                    no_edge: bond_types,
                });
            }
            if g.edge(i, j) != bond_types {
                return Err(GraphError::DuplicateBond(i.min(j), i.max(j)));
            }
            g.set_edge(i, j, c);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.node_types.len()
    }

    pub fn bond_types(&self) -> usize {
        self.bond_types
    }

    pub fn no_edge(&self) -> usize {
        self.bond_types
    }

    pub fn node_types(&self) -> &[usize] {
        &self.node_types
    }

    pub fn node_type(&self, i: usize) -> usize {
        self.node_types[i]
    }

    pub fn edge(&self, i: usize, j: usize) -> usize {
        self.edges[i * self.n() + j]
    }

    pub fn has_bond(&self, i: usize, j: usize) -> bool {
        self.edge(i, j) != self.bond_types
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_edge(&mut self, i: usize, j: usize, category: usize) {
        assert!(i != j, "self-loop");
        assert!(category <= self.bond_types, "edge category out of range");
        let n = self.n();
        self.edges[i * n + j] = category;
        self.edges[j * n + i] = category;
    }

    pub fn set_node_type(&mut self, i: usize, t: usize) {
        self.node_types[i] = t;
    }

    /// Appends an isolated node and returns its index.
    pub fn push_node(&mut self, t: usize) -> usize {
        let n = self.n();
        let mut edges = vec![self.bond_types; (n + 1) * (n + 1)];
        for i in 0..n {
            edges[i * (n + 1)..i * (n + 1) + n].copy_from_slice(&self.edges[i * n..(i + 1) * n]);
        }
        self.edges = edges;
        self.node_types.push(t);
        n
    }

    /// Bonds as `(i, j, category)` with `i < j`, row-major.
    pub fn bonds(&self) -> Vec<(usize, usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = self.edge(i, j);
                if c != self.bond_types {
                    out.push((i, j, c));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| j != i && self.has_bond(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// First node not reachable from node 0, if any.
    pub fn unreachable_node(&self) -> Option<usize> {
        let n = self.n();
        if n == 0 {
            return None;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.unreachable_node().is_none()
    }

    /// Relabels nodes: node `k` of the result is node `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length");
        let mut g = Self::new(
            perm.iter().map(|&p| self.node_types[p]).collect(),
            self.bond_types,
        );
        for a in 0..n {
            for b in 0..n {
                g.edges[a * n + b] = self.edges[perm[a] * n + perm[b]];
            }
        }
        g
    }

    /// Subgraph induced by the first `m` nodes.
    pub fn prefix(&self, m: usize) -> Self {
        let m = m.min(self.n());
        let n = self.n();
        let mut g = Self::new(self.node_types[..m].to_vec(), self.bond_types);
        for i in 0..m {
            g.edges[i * m..(i + 1) * m].copy_from_slice(&self.edges[i * n..i * n + m]);
        }
        g
    }

    /// Row-major one-hot node features (`n x d`).
    pub fn one_hot_nodes(&self, d: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n() * d];
        for (i, &t) in self.node_types.iter().enumerate() {
            x[i * d + t] = 1.0;
        }
        x
    }

    /// Checks structural invariants against vocabulary sizes.
    pub fn validate(&self, atom_types: usize, max_size: usize) -> Result<(), GraphError> {
        let n = self.n();
        if n == 0 || n > max_size {
            return Err(GraphError::Size { n, max: max_size });
        }
        if let Some(&t) = self.node_types.iter().find(|&&t| t >= atom_types) {
            return Err(GraphError::AtomType(t));
        }
        for i in 0..n {
            if self.edge(i, i) != self.bond_types {
                return Err(GraphError::SelfLoop(i));
            }
            for j in 0..i {
                let c = self.edge(i, j);
                if c > self.bond_types {
                    return Err(GraphError::EdgeCategory {
                        category: c,
                        no_edge: self.bond_types,
                    });
                }
                if c != self.edge(j, i) {
                    return Err(GraphError::DuplicateBond(j, i));
                }
            }
        }
        Ok(())
    }
}

/// A generation state: the nodes generated so far and which edge slots are
/// already decided. `None` marks an undecided slot; it is invisible to the
/// encoder in every relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixGraph {
    node_types: Vec<usize>,
    edges: Vec<Option<usize>>,
}

impl PrefixGraph {
    /// First `m` nodes of `g` with all their mutual edges decided.
    pub fn nodes(g: &MolecularGraph, m: usize) -> Self {
        let mut edges = vec![None; m * m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    edges[i * m + j] = Some(g.edge(i, j));
                }
            }
        }
        Self {
            node_types: g.node_types()[..m].to_vec(),
            edges,
        }
    }

    /// State before deciding edge `(i, j)`, `j < i`: nodes `0..=i`, with the
    /// pairs `(i, j')` for `j' >= j` still undecided.
    pub fn edge_step(g: &MolecularGraph, i: usize, j: usize) -> Self {
        let mut p = Self::nodes(g, i + 1);
        for jp in j..i {
            p.set(i, jp, None);
        }
        p
    }

    /// Builds a prefix directly from parts.
    pub fn from_parts(node_types: Vec<usize>, edges: Vec<Option<usize>>) -> Self {
        assert_eq!(edges.len(), node_types.len() * node_types.len());
        Self { node_types, edges }
    }

    pub fn len(&self) -> usize {
        self.node_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_types.is_empty()
    }

    pub fn node_types(&self) -> &[usize] {
        &self.node_types
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<usize> {
        self.edges[i * self.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, category: Option<usize>) {
        let m = self.len();
        self.edges[i * m + j] = category;
        self.edges[j * m + i] = category;
    }
}
