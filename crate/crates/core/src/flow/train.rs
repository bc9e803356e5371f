use graphaf_tensor::{AdamConfig, AdamState, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::GraphAF;
use crate::error::FlowError;
use crate::graph::{bfs_reorder, dequantize, max_dependency, MolecularGraph};
use crate::rgcn::bind;
use crate::rng::{item_rng, stream_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            window: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-graph negative log-likelihood seen during each epoch.
    pub epoch_nll: Vec<f64>,
    pub updates: usize,
}

struct ItemResult {
    nll: f64,
    grads: Vec<Option<Tensor>>,
    col_sum: Vec<f64>,
    col_sq: Vec<f64>,
    rows: usize,
}

/// Random BFS order whose bonds all fit in `window`; other start nodes are
/// tried if the first draw does not fit.
pub fn reorder_within<R: Rng + ?Sized>(
    g: &MolecularGraph,
    window: usize,
    rng: &mut R,
) -> Result<MolecularGraph, FlowError> {
    let n = g.n();
    let first = rng.random_range(0..n);
    let mut widest = (0, 0);
    for k in 0..n {
        let (h, _) = bfs_reorder(g, (first + k) % n, rng)?;
        let dep = max_dependency(&h);
        if dep <= window {
            return Ok(h);
        }
        if dep > widest.0 - widest.1 {
            widest = h
                .bonds()
                .into_iter()
                .map(|(a, b, _)| (b, a))
                .max_by_key(|(b, a)| b - a)
                .unwrap_or((0, 0));
        }
    }
    Err(FlowError::WindowExceeded {
        i: widest.0,
        j: widest.1,
        window,
    })
}

fn item(
    model: &GraphAF,
    g: &MolecularGraph,
    noise_seed: u64,
    window: usize,
) -> Result<ItemResult, FlowError> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let z = dequantize(g, model.config.atom_types, &mut rng);
    let mut tape = Tape::new();
    let vars = bind(&mut tape, &model.store);
    let rec = model.record_log_likelihood(&mut tape, &vars, g, &z, window)?;
    let nll = tape.neg(rec.total);
    let grads = tape.backward(nll)?;
    let k = model.config.hidden;
    let (mut col_sum, mut col_sq, mut rows) = (vec![0.0; k], vec![0.0; k], 0);
    if let Some(h) = rec.sv.h_raw {
        let h = tape.value(h);
        rows = h.shape()[0];
        for r in 0..rows {
            for (c, &x) in h.row_slice(r).iter().enumerate() {
                col_sum[c] += x;
                col_sq[c] += x * x;
            }
        }
    }
    Ok(ItemResult {
        nll: tape.value(nll).item(),
        grads: model
            .store
            .entries()
            .iter()
            .zip(&vars)
            .map(|(e, &v)| {
                if e.trainable {
                    grads.get(v).cloned()
                } else {
                    None
                }
            })
            .collect(),
        col_sum,
        col_sq,
        rows,
    })
}

/// Maximizes the dequantized log-likelihood of `data` with Adam.
///
/// Each epoch draws a fresh BFS order and fresh dequantization noise per
/// graph. Per-graph gradients are computed in parallel and merged in batch
/// order, so results do not depend on the thread count. Batch-norm running
/// statistics follow the pre-normalization rows of every prefix seen in a batch.
pub fn train(
    model: &mut GraphAF,
    data: &[MolecularGraph],
    cfg: &TrainConfig,
) -> Result<TrainReport, FlowError> {
    if data.is_empty() {
        return Err(FlowError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(FlowError::Dimension("batch size must be positive".into()));
    }
    let mut adam = AdamState::for_store(cfg.adam, &model.store);
    let base = stream_seed(cfg.seed, "train");
    let mut report = TrainReport {
        epoch_nll: Vec::with_capacity(cfg.epochs),
        updates: 0,
    };
    for epoch in 0..cfg.epochs {
        let mut rng = item_rng(base, epoch as u64);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let jobs = chunk
                .iter()
                .map(|&i| {
                    Ok((
                        reorder_within(&data[i], cfg.window, &mut rng)?,
                        rng.random::<u64>(),
                    ))
                })
                .collect::<Result<Vec<_>, FlowError>>()?;
            let snapshot = &*model;
            let results = jobs
                .par_iter()
                .map(|(g, seed)| item(snapshot, g, *seed, cfg.window))
                .collect::<Vec<_>>();
            let k = model.config.hidden;
            let mut grads: Vec<Option<Tensor>> = vec![None; model.store.len()];
            let (mut nll, mut col_sum, mut col_sq, mut rows) = (0.0, vec![0.0; k], vec![0.0; k], 0);
            for r in results {
                let r = r?;
                nll += r.nll;
                for (acc, g) in grads.iter_mut().zip(r.grads) {
                    match (acc.as_mut(), g) {
                        (Some(a), Some(g)) => a.add_in_place(&g)?,
                        (None, Some(g)) => *acc = Some(g),
                        _ => {}
                    }
                }
                for c in 0..k {
                    col_sum[c] += r.col_sum[c];
                    col_sq[c] += r.col_sq[c];
                }
                rows += r.rows;
            }
            if !nll.is_finite() {
                return Err(FlowError::Divergence {
                    epoch,
                    batch: batch_index,
                });
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in grads.iter_mut().flatten() {
                *g = g.map(|x| x * scale);
            }
            adam.step_store(&mut model.store, &grads)
                .map_err(|e| match e {
                    graphaf_tensor::OptimError::NonFiniteGradient(_) => FlowError::Divergence {
                        epoch,
                        batch: batch_index,
                    },
                    other => FlowError::Optim(other),
                })?;
            if rows > 0 {
                let mean: Vec<f64> = col_sum.iter().map(|s| s / rows as f64).collect();
                let var: Vec<f64> = col_sq
                    .iter()
                    .zip(&mean)
                    .map(|(q, m)| (q / rows as f64 - m * m).max(0.0))
                    .collect();
                model.update_running_stats(&mean, &var);
            }
            epoch_total += nll;
            report.updates += 1;
        }
        report.epoch_nll.push(epoch_total / data.len() as f64);
    }
    Ok(report)
}
