use rand::Rng;

use super::MolecularGraph;
use crate::error::GraphError;

/// Continuous relaxation of a graph: one-hot plus `U[0,1)` noise.
///
/// `za` holds one row per lower-triangular pair in generation order
/// `(1,0), (2,0), (2,1), (3,0), ...`; see [`pair_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct DequantizedGraph {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub zx: Vec<f64>,
    pub za: Vec<f64>,
}

impl DequantizedGraph {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.zx[i * self.d..(i + 1) * self.d]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.zx[i * self.d..(i + 1) * self.d]
    }

    pub fn edge(&self, i: usize, j: usize) -> &[f64] {
        let k = pair_index(i, j);
        &self.za[k * self.c..(k + 1) * self.c]
    }

    pub fn edge_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let k = pair_index(i, j);
        &mut self.za[k * self.c..(k + 1) * self.c]
    }
}

/// Row of pair `(i, j)`, `j < i`, in the lower-triangular generation order.
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(j < i);
    i * (i - 1) / 2 + j
}

/// Adds fresh uniform noise to every one-hot entry. Node noise is drawn first,
/// then pair noise in generation order.
pub fn dequantize<R: Rng + ?Sized>(g: &MolecularGraph, d: usize, rng: &mut R) -> DequantizedGraph {
    let n = g.n();
    let c = g.bond_types() + 1;
    let mut zx = g.one_hot_nodes(d);
    for v in &mut zx {
        *v += rng.random::<f64>();
    }
    let pairs = n * n.saturating_sub(1) / 2;
    let mut za = vec![0.0; pairs * c];
    for i in 1..n {
        for j in 0..i {
            let row = &mut za[pair_index(i, j) * c..(pair_index(i, j) + 1) * c];
            row[g.edge(i, j)] = 1.0;
            for v in row.iter_mut() {
                *v += rng.random::<f64>();
            }
        }
    }
    DequantizedGraph { n, d, c, zx, za }
}

/// Index of the largest entry; ties go to the lowest index. NaN is an error.
pub fn argmax(v: &[f64]) -> Result<usize, GraphError> {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x.is_nan() {
            return Err(GraphError::NaN);
        }
        if x > v[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Decodes every slot by argmax.
pub fn quantize(z: &DequantizedGraph) -> Result<MolecularGraph, GraphError> {
    let expected = z.n * z.d;
    if z.zx.len() != expected {
        return Err(GraphError::Dimension {
            expected,
            got: z.zx.len(),
        });
    }
    let expected = z.n * z.n.saturating_sub(1) / 2 * z.c;
    if z.za.len() != expected || z.c == 0 {
        return Err(GraphError::Dimension {
            expected,
            got: z.za.len(),
        });
    }
    let types = (0..z.n)
        .map(|i| argmax(z.node(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = MolecularGraph::new(types, z.c - 1);
    for i in 1..z.n {
        for j in 0..i {
            g.set_edge(i, j, argmax(z.edge(i, j))?);
        }
    }
    Ok(g)
}
