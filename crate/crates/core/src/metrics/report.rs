use std::fmt::Write as _;

use rayon::prelude::*;

use super::IsoClasses;
use crate::error::FlowError;
use crate::flow::{reorder_within, GraphAF};
use crate::graph::{valency_audit, AtomVocab, BondVocab, MolecularGraph};
use crate::rng::item_rng;
use crate::sampler::reconstruct;

/// What `evaluate_set` should measure beyond the set statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions<'a> {
    /// Measure reconstruction of the training set with this model, window and seed.
    pub reconstruction: Option<(&'a GraphAF, usize, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub total: usize,
    pub valid: usize,
    /// Distinct isomorphism classes among valid samples.
    pub unique: usize,
    /// Valid samples whose class is absent from the training set.
    pub novel: usize,
    pub reconstructed: usize,
    pub reconstruction_total: usize,
    pub validity: f64,
    /// `unique / valid`.
    pub uniqueness: f64,
    /// `unique / total`.
    pub uniqueness_all: f64,
    /// `novel / valid`.
    pub novelty: f64,
    pub reconstruction: f64,
    pub invalid: Vec<usize>,
    pub duplicates: Vec<usize>,
    pub seen_in_training: Vec<usize>,
    pub reconstruction_failures: Vec<usize>,
}

fn frac(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn evaluate_set(
    samples: &[MolecularGraph],
    train: &[MolecularGraph],
    vocab: &AtomVocab,
    bonds: &BondVocab,
    opts: EvalOptions<'_>,
) -> Result<GenerationReport, FlowError> {
    let mut invalid = Vec::new();
    let mut duplicates = Vec::new();
    let mut seen_in_training = Vec::new();
    let mut train_classes = IsoClasses::new();
    for g in train {
        train_classes.insert(g);
    }
    let mut classes = IsoClasses::new();
    let mut valid = 0;
    for (k, g) in samples.iter().enumerate() {
        if valency_audit(g, vocab, bonds).is_err() || !g.is_connected() {
            invalid.push(k);
            continue;
        }
        valid += 1;
        if !classes.insert(g).1 {
            duplicates.push(k);
        }
        if train_classes.contains(g) {
            seen_in_training.push(k);
        }
    }
    let mut reconstruction_failures = Vec::new();
    let mut reconstruction_total = 0;
    if let Some((model, window, seed)) = opts.reconstruction {
        reconstruction_total = train.len();
        let ok = train
            .par_iter()
            .enumerate()
            .map(|(k, g)| {
                let mut rng = item_rng(seed, k as u64);
                let ordered = reorder_within(g, window, &mut rng)?;
                Ok(reconstruct(model, &ordered, window, &mut rng)? == ordered)
            })
            .collect::<Result<Vec<bool>, FlowError>>()?;
        reconstruction_failures = ok
            .iter()
            .enumerate()
            .filter(|(_, &o)| !o)
            .map(|(k, _)| k)
            .collect();
    }
    let unique = classes.len();
    let novel = valid - seen_in_training.len();
    let reconstructed = reconstruction_total - reconstruction_failures.len();
    Ok(GenerationReport {
        total: samples.len(),
        valid,
        unique,
        novel,
        reconstructed,
        reconstruction_total,
        validity: frac(valid, samples.len()),
        uniqueness: frac(unique, valid),
        uniqueness_all: frac(unique, samples.len()),
        novelty: frac(novel, valid),
        reconstruction: frac(reconstructed, reconstruction_total),
        invalid,
        duplicates,
        seen_in_training,
        reconstruction_failures,
    })
}

impl GenerationReport {
    fn rows(&self) -> Vec<(&'static str, f64, String)> {
        vec![
            (
                "validity",
                self.validity,
                format!("{}/{}", self.valid, self.total),
            ),
            (
                "uniqueness",
                self.uniqueness,
                format!("{}/{}", self.unique, self.valid),
            ),
            (
                "uniqueness_all",
                self.uniqueness_all,
                format!("{}/{}", self.unique, self.total),
            ),
            (
                "novelty",
                self.novelty,
                format!("{}/{}", self.novel, self.valid),
            ),
            (
                "reconstruction",
                self.reconstruction,
                format!("{}/{}", self.reconstructed, self.reconstruction_total),
            ),
        ]
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<16} {:>8} {:>12}\n", "metric", "value", "count");
        for (name, v, c) in self.rows() {
            let _ = writeln!(s, "{name:<16} {v:>8.4} {c:>12}");
        }
        s
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (name, v, _) in self.rows() {
            let _ = writeln!(s, "{name}={v}");
        }
        for (name, v) in [
            ("total", self.total),
            ("valid", self.valid),
            ("unique", self.unique),
            ("novel", self.novel),
            ("reconstructed", self.reconstructed),
            ("reconstruction_total", self.reconstruction_total),
        ] {
            let _ = writeln!(s, "{name}={v}");
        }
        s
    }

    /// `metric,value,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,count\n");
        for (name, v, c) in self.rows() {
            let _ = writeln!(s, "{name},{v},{c}");
        }
        s
    }
}
