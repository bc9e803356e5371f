use rayon::prelude::*;

use super::MetricsError;
use crate::graph::MolecularGraph;

pub const CLUSTER_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Degree,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmdEstimator {
    Biased,
    /// Clamped at zero.
    #[default]
    Unbiased,
}

/// Count of nodes per degree, `0..=max degree`.
pub fn degree_histogram(g: &MolecularGraph) -> Vec<f64> {
    let degrees: Vec<usize> = (0..g.n()).map(|i| g.degree(i)).collect();
    let mut h = vec![0.0; degrees.iter().max().map_or(1, |m| m + 1)];
    for d in degrees {
        h[d] += 1.0;
    }
    h
}

/// Local clustering coefficient per node (0 for degree < 2).
pub fn clustering_coefficients(g: &MolecularGraph) -> Vec<f64> {
    (0..g.n())
        .map(|i| {
            let nb: Vec<usize> = g.neighbors(i).collect();
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0;
            for (a, &u) in nb.iter().enumerate() {
                links += nb[a + 1..].iter().filter(|&&v| g.has_bond(u, v)).count();
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

fn cluster_histogram(g: &MolecularGraph) -> Vec<f64> {
    let mut h = vec![0.0; CLUSTER_BINS];
    for c in clustering_coefficients(g) {
        h[((c * CLUSTER_BINS as f64) as usize).min(CLUSTER_BINS - 1)] += 1.0;
    }
    h
}

fn normalize(mut h: Vec<f64>, width: usize) -> Vec<f64> {
    h.resize(width, 0.0);
    let s: f64 = h.iter().sum();
    if s > 0.0 {
        h.iter_mut().for_each(|x| *x /= s);
    }
    h
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn kernel_sum(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64, skip_diagonal: bool) -> f64 {
    let rows: Vec<f64> = x
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            y.iter()
                .enumerate()
                .filter(|&(j, _)| !(skip_diagonal && i == j))
                .map(|(_, b)| {
                    let t = total_variation(a, b);
                    (-t * t / (2.0 * sigma * sigma)).exp()
                })
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum()
}

/// Squared MMD between the per-graph histograms of `stat`, with the Gaussian
/// kernel on total-variation distance.
pub fn mmd(
    a: &[MolecularGraph],
    b: &[MolecularGraph],
    stat: Statistic,
    sigma: f64,
    estimator: MmdEstimator,
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if !(sigma > 0.0) {
        return Err(MetricsError::Bandwidth(sigma));
    }
    if estimator == MmdEstimator::Unbiased && a.len().min(b.len()) < 2 {
        return Err(MetricsError::TooFew(a.len().min(b.len())));
    }
    let hist = |g: &MolecularGraph| match stat {
        Statistic::Degree => degree_histogram(g),
        Statistic::Cluster => cluster_histogram(g),
    };
    let ha: Vec<Vec<f64>> = a.iter().map(hist).collect();
    let hb: Vec<Vec<f64>> = b.iter().map(hist).collect();
    let width = ha.iter().chain(&hb).map(Vec::len).max().unwrap_or(1);
    let ha: Vec<Vec<f64>> = ha.into_iter().map(|h| normalize(h, width)).collect();
    let hb: Vec<Vec<f64>> = hb.into_iter().map(|h| normalize(h, width)).collect();
    let (m, n) = (a.len() as f64, b.len() as f64);
    let kab = kernel_sum(&ha, &hb, sigma, false) / (m * n);
    let value = match estimator {
        MmdEstimator::Biased => {
            kernel_sum(&ha, &ha, sigma, false) / (m * m)
                + kernel_sum(&hb, &hb, sigma, false) / (n * n)
                - 2.0 * kab
        }
        MmdEstimator::Unbiased => {
            kernel_sum(&ha, &ha, sigma, true) / (m * (m - 1.0))
                + kernel_sum(&hb, &hb, sigma, true) / (n * (n - 1.0))
                - 2.0 * kab
        }
    };
    Ok(value.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdReport {
    pub degree: f64,
    pub cluster: f64,
    pub bandwidth: f64,
}

pub fn mmd_report(
    a: &[MolecularGraph],
    b: &[MolecularGraph],
    sigma: f64,
) -> Result<MmdReport, MetricsError> {
    Ok(MmdReport {
        degree: mmd(a, b, Statistic::Degree, sigma, MmdEstimator::Unbiased)?,
        cluster: mmd(a, b, Statistic::Cluster, sigma, MmdEstimator::Unbiased)?,
        bandwidth: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histograms() {
        let tri_tail = MolecularGraph::from_bonds(
            vec![0; 4],
            1,
            &[(0, 1, 0), (1, 2, 0), (2, 0, 0), (2, 3, 0)],
        )
        .unwrap();
        assert_eq!(degree_histogram(&tri_tail), vec![0.0, 1.0, 2.0, 1.0]);
        let c = clustering_coefficients(&tri_tail);
        assert_eq!(c[0], 1.0);
        assert!((c[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c[3], 0.0);
        let h = cluster_histogram(&tri_tail);
        assert_eq!((h[0], h[33], h[99]), (1.0, 1.0, 2.0));
    }

    #[test]
    fn errors() {
        let g = MolecularGraph::new(vec![0], 1);
        assert_eq!(
            mmd(
                &[],
                &[g.clone()],
                Statistic::Degree,
                1.0,
                MmdEstimator::Biased
            ),
            Err(MetricsError::EmptySet)
        );
        assert_eq!(
            mmd(
                &[g.clone()],
                &[g.clone()],
                Statistic::Degree,
                1.0,
                MmdEstimator::Unbiased
            ),
            Err(MetricsError::TooFew(1))
        );
        assert!(mmd(
            &[g.clone()],
            &[g],
            Statistic::Degree,
            0.0,
            MmdEstimator::Biased
        )
        .is_err());
    }
}
