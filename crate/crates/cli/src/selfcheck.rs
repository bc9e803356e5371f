//! Quick numerical self-tests on small random models.

use std::time::Instant;

use graphaf_core::flow::{reorder_within, GraphAF, ModelConfig};
use graphaf_core::graph::{dequantize, gen_synthetic_molecules, valency_audit, AtomVocab, BondVocab, MolecularGraph, SynthConfig};
use graphaf_core::rng::{stream, stream_seed};
use graphaf_core::sampler::{sample_batch, SamplerConfig};
use graphaf_core::FlowError;
use graphaf_tensor::grad_check;

const WINDOW: usize = 12;

type Suite = Result<String, String>;

fn model(seed: u64, hidden: usize, scale: f64) -> Result<GraphAF, String> {
    let mut cfg = ModelConfig::new(3, 3);
    cfg.hidden = hidden;
    let mut r = stream(seed, "model");
    let mut m = GraphAF::new(cfg, &mut r).map_err(|e| e.to_string())?;
    m.perturb(scale, &mut r);
    Ok(m)
}

fn graphs(seed: u64, count: usize) -> Result<Vec<MolecularGraph>, String> {
    let (v, b) = (AtomVocab::organic(), BondVocab::standard());
    let mut r = stream(seed, "graphs");
    let raw = gen_synthetic_molecules(count, 10, &v, &b, &SynthConfig::default(), &mut r).map_err(|e| e.to_string())?;
    raw.iter().map(|g| reorder_within(g, WINDOW, &mut r).map_err(|e| e.to_string())).collect()
}

fn invertibility(seed: u64) -> Suite {
    let m = model(seed, 8, 0.5)?;
    let mut r = stream(seed, "noise");
    let (mut zx, mut ex) = (0.0f64, 0.0f64);
    let gs = graphs(seed, 20)?;
    for g in &gs {
        let z = dequantize(g, 3, &mut r);
        let lat = m.inverse(&z, WINDOW).map_err(|e| e.to_string())?;
        let (h, z2) = m.decode(&lat).map_err(|e| e.to_string())?;
        if &h != g {
            return Err("decoded graph differs from the input".into());
        }
        for (a, b) in z.zx.iter().chain(&z.za).zip(z2.zx.iter().chain(&z2.za)) {
            zx = zx.max((a - b).abs());
        }
        let back = m.inverse(&z2, WINDOW).map_err(|e| e.to_string())?;
        for (a, b) in lat.eps.iter().flatten().zip(back.eps.iter().flatten()) {
            ex = ex.max((a - b).abs());
        }
    }
    if zx < 1e-12 && ex < 1e-12 {
        Ok(format!("{} graphs, max error {:.1e}", gs.len(), zx.max(ex)))
    } else {
        Err(format!("round-trip errors {zx:e} / {ex:e}"))
    }
}

fn masking(seed: u64) -> Suite {
    let m = model(seed, 16, 0.5)?;
    let mut r = stream(seed, "noise");
    let mut worst = 0.0f64;
    let gs = graphs(seed, 20)?;
    for g in &gs {
        let z = dequantize(g, 3, &mut r);
        let p = m.log_likelihood_parallel(g, &z, WINDOW).map_err(|e| e.to_string())?;
        let s = m.log_likelihood_sequential(g, &z, WINDOW).map_err(|e| e.to_string())?;
        worst = worst.max((p.total - s.total).abs());
    }
    if worst < 1e-9 {
        Ok(format!("{} graphs, max |parallel - sequential| {worst:.1e}", gs.len()))
    } else {
        Err(format!("parallel and sequential differ by {worst:e}"))
    }
}

fn gradient(seed: u64) -> Suite {
    let m = model(seed, 8, 0.3)?;
    let g = MolecularGraph::from_bonds(vec![0, 2, 1], 3, &[(0, 1, 0), (0, 2, 1)]).map_err(|e| e.to_string())?;
    let z = dequantize(&g, 3, &mut stream(seed, "noise"));
    let params: Vec<_> = m.store().entries().iter().map(|e| e.tensor.clone()).collect();
    let report = grad_check(
        |tape, vars| {
            let ll = m.log_likelihood_on_tape(tape, vars, &g, &z, WINDOW).map_err(|e| match e {
                FlowError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(tape.neg(ll))
        },
        &params,
        1e-5,
    )
    .map_err(|e| e.to_string())?;
    if report.max_rel_error < 1e-4 {
        Ok(format!("{} entries, max rel err {:.1e}", report.checked, report.max_rel_error))
    } else {
        Err(format!("max rel err {:e}", report.max_rel_error))
    }
}

fn valency(seed: u64) -> Suite {
    let m = model(seed, 8, 1.0)?;
    let (v, b) = (AtomVocab::organic(), BondVocab::standard());
    let cfg = SamplerConfig::default();
    let drawn = sample_batch(&m, &v, &b, &cfg, 200, stream_seed(seed, "sample")).map_err(|e| e.to_string())?;
    let bad = drawn.iter().filter(|(g, _)| valency_audit(g, &v, &b).is_err()).count();
    if bad == 0 {
        Ok(format!("{} samples, all within valence", drawn.len()))
    } else {
        Err(format!("{bad}/{} samples violate valence", drawn.len()))
    }
}

/// Runs every suite, printing one line each; true if all pass.
pub fn run(seed: u64) -> bool {
    let suites: [(&str, fn(u64) -> Suite); 4] = [
        ("invertibility", invertibility),
        ("masking", masking),
        ("gradient", gradient),
        ("valency", valency),
    ];
    let mut ok = true;
    for (name, f) in suites {
        let t = Instant::now();
        let res = f(seed);
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("PASS {name}: {msg} [{secs:.2}s]"),
            Err(msg) => {
                ok = false;
                println!("FAIL {name}: {msg} [{secs:.2}s]");
            }
        }
    }
    ok
}
