//! Relational graph convolution over (partially decided) prefix graphs.
//!
//! Per layer and relation `r`: `ReLU(D^-1/2 (E_r + I) D^-1/2 H W_r)`, averaged
//! over relations. After the last layer rows go through batch norm (running
//! statistics) and are sum-pooled into the graph embedding.

use graphaf_tensor::{BatchNormMode, ParamStore, Tape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::FlowError;
use crate::graph::PrefixGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgcnConfig {
    pub atom_types: usize,
    pub bond_types: usize,
    pub layers: usize,
    pub hidden: usize,
    /// Give the virtual no-edge category its own relation weights.
    pub include_no_edge: bool,
    pub bn_eps: f64,
}

impl RgcnConfig {
    pub fn relations(&self) -> usize {
        self.bond_types + usize::from(self.include_no_edge)
    }
}

/// Where each encoder tensor lives in the parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct RgcnLayout {
    /// `weights[layer][relation]`.
    pub weights: Vec<Vec<usize>>,
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
}

pub(crate) fn xavier<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| dist.sample(rng)).collect(),
    )
}

impl RgcnLayout {
    /// Adds encoder tensors to `store`. With `rng = None` weights are zero
    /// (used to build checkpoint schemas).
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &RgcnConfig,
        mut rng: Option<&mut R>,
    ) -> Self {
        let k = cfg.hidden;
        let mut weights = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let rows = if l == 0 { cfg.atom_types } else { k };
            let layer = (0..cfg.relations())
                .map(|r| {
                    let w = match rng.as_deref_mut() {
                        Some(rng) => xavier(rows, k, rng),
                        None => Tensor::zeros(&[rows, k]),
                    };
                    store.push(format!("rgcn.layer{l}.rel{r}"), w, true)
                })
                .collect();
            weights.push(layer);
        }
        Self {
            weights,
            gamma: store.push("rgcn.bn.gamma", Tensor::full(&[1, k], 1.0), true),
            beta: store.push("rgcn.bn.beta", Tensor::zeros(&[1, k]), true),
            running_mean: store.push("rgcn.bn.running_mean", Tensor::zeros(&[1, k]), false),
            running_var: store.push("rgcn.bn.running_var", Tensor::full(&[1, k], 1.0), false),
        }
    }
}

/// Binds every store entry on `tape`: trainable entries as parameters, the
/// rest as constants. `vars[i]` corresponds to store entry `i`.
pub fn bind<'a>(tape: &mut Tape<'a>, store: &'a ParamStore) -> Vec<Var> {
    store
        .entries()
        .iter()
        .map(|e| {
            if e.trainable {
                tape.param_ref(&e.tensor)
            } else {
                tape.constant_ref(&e.tensor)
            }
        })
        .collect()
}

/// Symmetrically normalized `E_r + I` of one prefix (`m x m`).
pub fn normalized_adjacency(prefix: &PrefixGraph, category: usize) -> Tensor {
    let m = prefix.len();
    let mut a = vec![0.0; m * m];
    for u in 0..m {
        a[u * m + u] = 1.0;
        for v in 0..m {
            if u != v && prefix.edge(u, v) == Some(category) {
                a[u * m + v] = 1.0;
            }
        }
    }
    let inv_sqrt: Vec<f64> = (0..m)
        .map(|u| 1.0 / a[u * m..(u + 1) * m].iter().sum::<f64>().sqrt())
        .collect();
    for u in 0..m {
        for v in 0..m {
            a[u * m + v] *= inv_sqrt[u] * inv_sqrt[v];
        }
    }
    Tensor::matrix(m, m, a)
}

/// Encodings of a stack of prefixes.
#[derive(Debug, Clone)]
pub struct EncodedBatch {
    /// Stacked `H^L` before batch norm; `None` when every prefix is empty.
    pub h_raw: Option<Var>,
    /// Stacked normalized rows.
    pub h: Option<Var>,
    /// One pooled row per prefix (`count x k`); zero for empty prefixes.
    pub graph: Var,
    /// First stacked row of each prefix.
    pub offsets: Vec<usize>,
}

/// Encodes all `prefixes` in one stacked pass. Rows never mix across
/// prefixes, so each block equals what a single-prefix call would produce.
pub fn encode_batch(
    tape: &mut Tape<'_>,
    vars: &[Var],
    store: &ParamStore,
    layout: &RgcnLayout,
    cfg: &RgcnConfig,
    prefixes: &[&PrefixGraph],
) -> Result<EncodedBatch, FlowError> {
    let k = cfg.hidden;
    let mut offsets = Vec::with_capacity(prefixes.len());
    let mut types = Vec::new();
    for p in prefixes {
        offsets.push(types.len());
        if let Some(&t) = p.node_types().iter().find(|&&t| t >= cfg.atom_types) {
            return Err(FlowError::Dimension(format!(
                "atom type {t} but the encoder has {} input types",
                cfg.atom_types
            )));
        }
        types.extend_from_slice(p.node_types());
    }
    if types.is_empty() {
        let graph = tape.constant(Tensor::zeros(&[prefixes.len(), k]));
        return Ok(EncodedBatch {
            h_raw: None,
            h: None,
            graph,
            offsets,
        });
    }
    let relations = cfg.relations();
    let blocks: Vec<Vec<(usize, Tensor)>> = (0..relations)
        .map(|r| {
            prefixes
                .iter()
                .zip(&offsets)
                .filter(|(p, _)| !p.is_empty())
                .map(|(p, &o)| (o, normalized_adjacency(p, r)))
                .collect()
        })
        .collect();
    let mut h: Option<Var> = None;
    for l in 0..cfg.layers {
        let mut messages = Vec::with_capacity(relations);
        for r in 0..relations {
            let w = vars[layout.weights[l][r]];
            let xw = match h {
                None => tape.gather_rows(w, &types)?,
                Some(h) => tape.matmul(h, w)?,
            };
            let m = tape.block_matmul(blocks[r].clone(), xw)?;
            messages.push(tape.relu(m));
        }
        let total = tape.add_n(&messages)?;
        h = Some(tape.scale(total, 1.0 / relations as f64));
    }
    let h_raw = h.expect("at least one layer");
    let mode = BatchNormMode::Eval {
        mean: store.tensor(layout.running_mean).data(),
        var: store.tensor(layout.running_var).data(),
        eps: cfg.bn_eps,
    };
    let (h_norm, _) = tape.batch_norm(h_raw, vars[layout.gamma], vars[layout.beta], mode)?;
    let segments: Vec<(usize, usize)> = prefixes
        .iter()
        .zip(&offsets)
        .map(|(p, &o)| (o, p.len()))
        .collect();
    let graph = tape.segment_sum(h_norm, &segments)?;
    Ok(EncodedBatch {
        h_raw: Some(h_raw),
        h: Some(h_norm),
        graph,
        offsets,
    })
}

/// Encoder output for a single prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    /// `H^L` before batch norm.
    pub h_raw: Tensor,
    /// Batch-normalized rows.
    pub h: Tensor,
    /// Column sums of `h`.
    pub graph_embedding: Vec<f64>,
}

pub(crate) fn embeddings_from(
    tape: &Tape<'_>,
    enc: &EncodedBatch,
    t: usize,
    len: usize,
    k: usize,
) -> NodeEmbeddings {
    let rows = |v: Option<Var>| match v {
        Some(v) => {
            let d = tape.value(v).data();
            let o = enc.offsets[t];
            Tensor::matrix(len, k, d[o * k..(o + len) * k].to_vec())
        }
        None => Tensor::zeros(&[0, k]),
    };
    NodeEmbeddings {
        h_raw: rows(enc.h_raw),
        h: rows(enc.h),
        graph_embedding: tape.value(enc.graph).row_slice(t).to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MolecularGraph;

    #[test]
    fn adjacency_matches_hand_values() {
        // path 0-1-2 in relation 0: degrees with self loops 2,3,2
        let g = MolecularGraph::from_bonds(vec![0; 3], 1, &[(0, 1, 0), (1, 2, 0)]).unwrap();
        let a = normalized_adjacency(&PrefixGraph::nodes(&g, 3), 0);
        let s6 = 1.0 / 6f64.sqrt();
        let expect = [0.5, s6, 0.0, s6, 1.0 / 3.0, s6, 0.0, s6, 0.5];
        for (x, e) in a.data().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
        // no-edge relation: only 0 and 2 are joined
        let b = normalized_adjacency(&PrefixGraph::nodes(&g, 3), 1);
        assert_eq!(b.at(1, 1), 1.0);
        assert!((b.at(0, 2) - 0.5).abs() < 1e-15);
        // undecided slots are invisible
        let p = PrefixGraph::edge_step(&g, 2, 0);
        assert_eq!(normalized_adjacency(&p, 0).at(2, 2), 1.0);
        assert_eq!(normalized_adjacency(&p, 1).at(0, 2), 0.0);
    }
}
