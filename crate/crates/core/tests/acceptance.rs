//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{random_model, rng};
use graphaf_core::flow::{
    forward_transform, generation_steps, reorder_within, train, GraphAF, ModelConfig, Step,
    TrainConfig, TrainReport,
};
use graphaf_core::graph::{
    argmax, dequantize, erdos_renyi_graphs, gen_community_graphs, gen_synthetic_molecules,
    valency_audit, AtomVocab, BondVocab, DequantizedGraph, MolecularGraph, SynthConfig,
};
use graphaf_core::metrics::{mmd, MmdEstimator, Statistic};
use graphaf_core::rgcn::bind;
use graphaf_core::rl::{
    collect_trajectories, compute_action_logprob, finetune, lowest_scoring, optimize_constrained,
    ppo_gradients, ppo_loss_on_tape, ConstrainedConfig, FinetuneConfig, RewardConfig,
    StepBaselines, TargetAtomFraction,
};
use graphaf_core::sampler::{reconstruct, sample_batch, SamplerConfig};
use graphaf_core::FlowError;
use graphaf_tensor::{grad_check, relative_error, AdamConfig, Tape};
use rand::Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn organic() -> (AtomVocab, BondVocab) {
    (AtomVocab::organic(), BondVocab::standard())
}

fn molecules(count: usize, seed: u64) -> Vec<MolecularGraph> {
    let (v, b) = organic();
    gen_synthetic_molecules(count, 12, &v, &b, &SynthConfig::default(), &mut rng(seed)).unwrap()
}

fn bfs_set(data: &[MolecularGraph], seed: u64) -> Vec<MolecularGraph> {
    let mut r = rng(seed);
    data.iter().map(|g| reorder_within(g, 12, &mut r).unwrap()).collect()
}

fn n_fraction() -> TargetAtomFraction {
    TargetAtomFraction {
        atom_type: 1,
        symbol: "N".into(),
    }
}

// 1
fn invertibility() -> Check {
    let mut r = rng(100);
    let mut pairs = 0;
    let (mut inv_fwd, mut fwd_inv) = (0.0f64, 0.0f64);
    for m in 0..50 {
        let model = random_model(8, 0.5, 1000 + m);
        for g in bfs_set(&molecules(10, 2000 + m), 3000 + m) {
            // inverse then forward: z -> eps -> z
            let z = dequantize(&g, 3, &mut r);
            let latent = model.inverse(&z, 12).map_err(|e| e.to_string())?;
            let (_, z2) = model.decode(&latent).map_err(|e| e.to_string())?;
            for (a, b) in z.zx.iter().chain(&z.za).zip(z2.zx.iter().chain(&z2.za)) {
                inv_fwd = inv_fwd.max((a - b).abs());
            }
            // forward then inverse: eps -> z -> eps
            let mut fresh = latent.clone();
            for e in fresh.eps.iter_mut().flatten() {
                *e = r.sample(StandardNormal);
            }
            let (_, z3) = model.decode(&fresh).map_err(|e| e.to_string())?;
            let back = model.inverse(&z3, 12).map_err(|e| e.to_string())?;
            for (a, b) in fresh.eps.iter().flatten().zip(back.eps.iter().flatten()) {
                fwd_inv = fwd_inv.max((a - b).abs());
            }
            pairs += 1;
        }
    }
    ensure(inv_fwd < 1e-12 && fwd_inv < 1e-12, || format!("inverse∘forward {inv_fwd:e}, forward∘inverse {fwd_inv:e}"))?;
    Ok(format!("{pairs} pairs, max errors {inv_fwd:.1e} / {fwd_inv:.1e}"))
}

// 2
fn reconstruction(model: &GraphAF, data: &[MolecularGraph]) -> Check {
    let mut r = rng(200);
    let mut exact = 0;
    for g in data {
        let h = reorder_within(g, 12, &mut r).map_err(|e| e.to_string())?;
        if reconstruct(model, &h, 12, &mut r).map_err(|e| e.to_string())? == h {
            exact += 1;
        }
    }
    ensure(exact == data.len(), || format!("{exact}/{} exact", data.len()))?;
    Ok(format!("{exact}/{} exact", data.len()))
}

// 3
fn masking() -> Check {
    let model = random_model(16, 0.5, 300);
    let mut r = rng(301);
    let mut worst = 0.0f64;
    let graphs = bfs_set(&molecules(50, 302), 303);
    for g in &graphs {
        let z = dequantize(g, 3, &mut r);
        let par = model.log_likelihood_parallel(g, &z, 12).map_err(|e| e.to_string())?;
        let seq = model.log_likelihood_sequential(g, &z, 12).map_err(|e| e.to_string())?;
        worst = worst.max((par.total - seq.total).abs());
    }
    ensure(worst < 1e-9, || format!("max |parallel - sequential| = {worst:e}"))?;
    Ok(format!("{} graphs, max diff {worst:.1e}", graphs.len()))
}

fn step_offsets(z: &DequantizedGraph, steps: &[Step]) -> Vec<(Step, usize)> {
    // position of each step's first coordinate in the flat (zx ++ za) vector
    steps
        .iter()
        .map(|&s| match s {
            Step::Node(i) => (s, i * z.d),
            Step::Edge(i, j) => (s, z.zx.len() + (i * (i - 1) / 2 + j) * z.c),
        })
        .collect()
}

// 4
fn autoregressive() -> Check {
    let model = random_model(16, 0.5, 400);
    let mut r = rng(401);
    let graphs = bfs_set(&molecules(50, 402), 403);
    let mut checked = 0;
    for g in &graphs {
        let z = dequantize(g, 3, &mut r);
        let base = model.inverse(&z, 12).map_err(|e| e.to_string())?;
        let offsets = step_offsets(&z, &base.steps);
        let k = r.random_range(0..base.steps.len());
        let mut z2 = z.clone();
        // perturb every coordinate of steps k.. (node or edge), changing categories too
        for &(s, off) in &offsets[k..] {
            let width = if matches!(s, Step::Node(_)) { z.d } else { z.c };
            for c in 0..width {
                let v = r.random_range(0.0..2.0);
                if off < z.zx.len() {
                    z2.zx[off + c] = v;
                } else {
                    z2.za[off - z.zx.len() + c] = v;
                }
            }
        }
        let pert = model.inverse(&z2, 12).map_err(|e| e.to_string())?;
        for t in 0..k {
            let same = base.eps[t].iter().zip(&pert.eps[t]).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("step {t} changed after perturbing step {k}"))?;
        }
        checked += 1;
    }
    Ok(format!("{checked} graphs, earlier eps bitwise unchanged"))
}

fn log_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        acc += a[c][c].abs().ln();
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    acc
}

// 5
fn jacobian() -> Check {
    let mut cfg = ModelConfig::new(2, 1);
    cfg.hidden = 8;
    let mut r = rng(500);
    let mut model = GraphAF::new(cfg, &mut r).map_err(|e| e.to_string())?;
    model.perturb(0.5, &mut r);
    let g = MolecularGraph::from_bonds(vec![1, 0], 1, &[(0, 1, 0)]).unwrap();
    let z0 = dequantize(&g, 2, &mut r);
    let x: Vec<f64> = [z0.zx.clone(), z0.za.clone()].concat();
    let eps_of = |v: &[f64]| {
        let mut z = z0.clone();
        z.zx.copy_from_slice(&v[..4]);
        z.za.copy_from_slice(&v[4..]);
        model.inverse(&z, 12).unwrap().eps.concat()
    };
    let (n, h) = (x.len(), 1e-6);
    let mut jac = vec![vec![0.0; n]; n];
    for c in 0..n {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up[c] += h;
        dn[c] -= h;
        let (eu, ed) = (eps_of(&up), eps_of(&dn));
        for row in 0..n {
            jac[row][c] = (eu[row] - ed[row]) / (2.0 * h);
        }
    }
    let upper = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| jac[i][j].abs()).fold(0.0, f64::max);
    ensure(upper < 1e-8, || format!("off-triangle entry {upper:e}"))?;
    let analytic = model.log_likelihood_parallel(&g, &z0, 12).map_err(|e| e.to_string())?.log_det;
    let numeric = log_abs_det(jac);
    let rel = ((analytic - numeric) / analytic).abs();
    ensure(rel < 1e-4, || format!("log|det| {analytic} vs finite differences {numeric}"))?;
    Ok(format!("off-triangle max {upper:.1e}, log|det| rel err {rel:.1e}"))
}

// 6
fn gradients() -> Check {
    let model = random_model(8, 0.3, 600);
    let g = MolecularGraph::from_bonds(vec![0, 2, 1], 3, &[(0, 1, 0), (0, 2, 1)]).unwrap();
    let z = dequantize(&g, 3, &mut rng(601));
    let params: Vec<_> = model.store().entries().iter().map(|e| e.tensor.clone()).collect();
    let report = grad_check(
        |tape, vars| {
            let ll = model.log_likelihood_on_tape(tape, vars, &g, &z, 12).map_err(|e| match e {
                FlowError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(tape.neg(ll))
        },
        &params,
        1e-5,
    )
    .map_err(|e| e.to_string())?;
    ensure(report.max_rel_error < 1e-4, || format!("{report:?}"))?;
    Ok(format!("{} entries, max rel err {:.1e}", report.checked, report.max_rel_error))
}

fn train_once(data: &[MolecularGraph]) -> Result<(GraphAF, TrainReport), FlowError> {
    let mut model = GraphAF::new(ModelConfig::new(3, 3), &mut rng(700))?;
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 32,
        seed: 701,
        ..Default::default()
    };
    assert_eq!(cfg.adam.lr, 1e-3);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let report = single.install(|| train(&mut model, data, &cfg))?;
    Ok((model, report))
}

// 7
fn training(data: &[MolecularGraph], trained: &mut Option<GraphAF>) -> Check {
    let start = Instant::now();
    let (model, a) = train_once(data).map_err(|e| e.to_string())?;
    let single_run = start.elapsed();
    let (_, b) = train_once(data).map_err(|e| e.to_string())?;
    *trained = Some(model);
    let nll = &a.epoch_nll;
    let drop = (nll[0] - nll[nll.len() - 1]) / nll[0];
    ensure(a == b, || "same-seed runs differ".into())?;
    ensure(drop >= 0.2, || format!("NLL {:.3} -> {:.3} ({:.1}% drop)", nll[0], nll[nll.len() - 1], 100.0 * drop))?;
    ensure(single_run < Duration::from_secs(600), || format!("one run took {single_run:?}"))?;
    Ok(format!(
        "NLL {:.3} -> {:.3} ({:.1}% drop), identical traces, {:.1}s per run",
        nll[0],
        nll[nll.len() - 1],
        100.0 * drop,
        single_run.as_secs_f64()
    ))
}

fn validity(model: &GraphAF, check: bool, seed: u64) -> Result<usize, String> {
    let (v, b) = organic();
    let cfg = SamplerConfig {
        valency_check: check,
        ..Default::default()
    };
    let out = sample_batch(model, &v, &b, &cfg, 1000, seed).map_err(|e| e.to_string())?;
    Ok(out.iter().filter(|(g, _)| valency_audit(g, &v, &b).is_ok()).count())
}

fn untrained() -> GraphAF {
    GraphAF::new(ModelConfig::new(3, 3), &mut rng(800)).unwrap()
}

// 8
fn validity_with_check(trained: &GraphAF) -> Check {
    let reloaded = GraphAF::load_checkpoint(trained.config().clone(), &trained.save_checkpoint()).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (name, model) in [("trained", &reloaded), ("untrained", &untrained()), ("random", &random_model(32, 0.5, 801))] {
        let ok = validity(model, true, 802)?;
        ensure(ok == 1000, || format!("{name}: {ok}/1000 valid"))?;
        parts.push(format!("{name} {ok}/1000"));
    }
    Ok(parts.join(", "))
}

// 9
fn validity_without_check(trained: &GraphAF) -> Check {
    let t = validity(trained, false, 900)?;
    let u = validity(&untrained(), false, 900)?;
    ensure(t >= u, || format!("trained {t}/1000 < untrained {u}/1000"))?;
    Ok(format!("trained {t}/1000 >= untrained {u}/1000"))
}

fn mean_reward(model: &GraphAF, seed: u64) -> Result<f64, String> {
    let (v, b) = organic();
    let c = collect_trajectories(model, &v, &b, &SamplerConfig::default(), &RewardConfig::default(), &n_fraction(), 512, seed, None)
        .map_err(|e| e.to_string())?;
    Ok(c.trajectories.iter().map(|t| t.final_reward).sum::<f64>() / c.trajectories.len() as f64)
}

fn ppo_gradient_check() -> Result<f64, String> {
    let (v, b) = organic();
    let model = random_model(8, 0.5, 1000);
    let sampler = SamplerConfig {
        max_size: 4,
        ..Default::default()
    };
    let trajs = collect_trajectories(&model, &v, &b, &sampler, &RewardConfig::default(), &n_fraction(), 4, 1001, None)
        .map_err(|e| e.to_string())?
        .trajectories;
    let mut baselines = StepBaselines::new(0.9);
    baselines.values = vec![Some(0.1), Some(-0.2), Some(0.3), Some(0.0)];
    // analytic gradient of the clipped loss at the collecting parameters ...
    let (_, analytic) = ppo_gradients(&model, &trajs, &baselines, Some(0.2)).map_err(|e| e.to_string())?;
    // ... against central differences of the unclipped surrogate
    let unclipped = |m: &GraphAF| {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, m.store());
        let l = ppo_loss_on_tape(&mut tape, &vars, m, &trajs, &baselines, None).unwrap();
        tape.value(l).item()
    };
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut work = model.clone();
    for (i, e) in model.store().entries().iter().enumerate() {
        if !e.trainable {
            continue;
        }
        for k in 0..e.tensor.len() {
            let orig = e.tensor.data()[k];
            work.store_mut().tensor_mut(i).data_mut()[k] = orig + h;
            let up = unclipped(&work);
            work.store_mut().tensor_mut(i).data_mut()[k] = orig - h;
            let dn = unclipped(&work);
            work.store_mut().tensor_mut(i).data_mut()[k] = orig;
            let a = analytic[i].as_ref().map_or(0.0, |g| g.data()[k]);
            worst = worst.max(relative_error(a, (up - dn) / (2.0 * h)));
        }
    }
    Ok(worst)
}

// 10
fn ppo(pretrained: &GraphAF, finetuned: &mut Option<GraphAF>) -> Check {
    let fd = ppo_gradient_check()?;
    ensure(fd < 1e-4, || format!("surrogate gradient rel err {fd:e}"))?;
    let (v, b) = organic();
    let before = mean_reward(pretrained, 1002)?;
    let mut model = pretrained.clone();
    let cfg = FinetuneConfig {
        iterations: 50,
        batch_size: 64,
        seed: 1003,
        ..Default::default()
    };
    let report = finetune(&mut model, &v, &b, &cfg, &n_fraction(), None).map_err(|e| e.to_string())?;
    let after = mean_reward(&model, 1004)?;
    *finetuned = Some(model);
    let gain = (after - before) / before;
    let trace = &report.reward_trace;
    ensure(gain >= 0.5, || format!("mean reward {before:.4} -> {after:.4} ({:+.1}%), trace {:.3} .. {:.3}", 100.0 * gain, trace[0], trace[trace.len() - 1]))?;
    Ok(format!("surrogate grad rel err {fd:.1e}; mean reward {before:.3} -> {after:.3} ({:+.0}%)", 100.0 * gain))
}

// 11
fn constrained(model: &GraphAF, data: &[MolecularGraph]) -> Check {
    let (v, b) = organic();
    let scorer = n_fraction();
    let picks: Vec<MolecularGraph> = lowest_scoring(data, &scorer, 20).into_iter().map(|i| data[i].clone()).collect();
    let cfg = ConstrainedConfig {
        samples_per_molecule: 50,
        deltas: vec![0.4],
        seed: 1100,
        ..Default::default()
    };
    let out = optimize_constrained(model, &v, &b, &picks, &scorer, &cfg).map_err(|e| e.to_string())?;
    let n = out.len() as f64;
    let mean = out.iter().map(|r| r.outcomes[0].improvement).sum::<f64>() / n;
    let success = out.iter().filter(|r| r.outcomes[0].success).count() as f64 / n;
    ensure(mean > 0.0 && success >= 0.8, || format!("mean improvement {mean:.4}, success {:.0}%", 100.0 * success))?;
    Ok(format!("{} molecules, mean improvement {mean:.3}, success {:.0}%", out.len(), 100.0 * success))
}

// 12
fn community_mmd() -> Check {
    let mut r = rng(1200);
    let train_set = gen_community_graphs(300, 6, 0.7, 0.05, &mut r).map_err(|e| e.to_string())?;
    for stat in [Statistic::Degree, Statistic::Cluster] {
        let same = mmd(&train_set, &train_set, stat, 1.0, MmdEstimator::Unbiased).map_err(|e| e.to_string())?;
        ensure(same == 0.0, || format!("MMD(S, S) = {same:e}"))?;
    }
    let mut cfg = ModelConfig::new(1, 1);
    cfg.hidden = 32;
    let mut model = GraphAF::new(cfg, &mut r).map_err(|e| e.to_string())?;
    // generic graphs need more updates than the molecular default schedule gives
    let tc = TrainConfig {
        epochs: 50,
        batch_size: 32,
        adam: AdamConfig {
            lr: 5e-3,
            ..Default::default()
        },
        seed: 1201,
        ..Default::default()
    };
    train(&mut model, &train_set, &tc).map_err(|e| e.to_string())?;
    let (v, b) = (AtomVocab::generic(11), BondVocab::single_only());
    let sampler = SamplerConfig {
        max_size: 12,
        ..Default::default()
    };
    let generated: Vec<MolecularGraph> = sample_batch(&model, &v, &b, &sampler, 300, 1202)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(g, _)| g)
        .collect();
    let er = erdos_renyi_graphs(300, 12, 0.345, &mut r);
    let gen_mmd = mmd(&generated, &train_set, Statistic::Degree, 1.0, MmdEstimator::Unbiased).map_err(|e| e.to_string())?;
    let er_mmd = mmd(&er, &train_set, Statistic::Degree, 1.0, MmdEstimator::Unbiased).map_err(|e| e.to_string())?;
    ensure(gen_mmd < er_mmd, || format!("degree MMD generated {gen_mmd:.4} >= Erdős–Rényi {er_mmd:.4}"))?;
    Ok(format!("MMD(S,S) = 0; degree MMD generated {gen_mmd:.4} < Erdős–Rényi {er_mmd:.4}"))
}

// 13
fn category_probabilities() -> Check {
    const DRAWS: usize = 20_000;
    let mut r = rng(1300);
    let mut worst_sum = 0.0f64;
    let mut worst_sigma = 0.0f64;
    for m in 0..20 {
        let model = random_model(16, 1.0, 1301 + m);
        let g = bfs_set(&molecules(1, 1400 + m), 1500 + m).remove(0);
        let steps = generation_steps(g.n(), 12, 0);
        let step = steps[r.random_range(0..steps.len())];
        let prefix = step.prefix(&g);
        let cats = if matches!(step, Step::Node(_)) { 3 } else { 4 };
        let probs: Vec<f64> = (0..cats)
            .map(|c| compute_action_logprob(&model, &prefix, step, c, 1.0).map(f64::exp))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
        let cond = model.step_conditional(&prefix, step).map_err(|e| e.to_string())?;
        let mut counts = vec![0usize; cats];
        for _ in 0..DRAWS {
            let eps: Vec<f64> = (0..cats).map(|_| r.sample(StandardNormal)).collect();
            counts[argmax(&forward_transform(&eps, &cond.mu, &cond.alpha)).unwrap()] += 1;
        }
        for (p, &c) in probs.iter().zip(&counts) {
            let sigma = (p * (1.0 - p) / DRAWS as f64).sqrt();
            let dev = (c as f64 / DRAWS as f64 - p).abs();
            let z = if sigma > 0.0 { dev / sigma } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
            worst_sigma = worst_sigma.max(z);
            ensure(z <= 3.0, || format!("model {m} {step:?}: p = {p:.5}, frequency {:.5} ({z:.2} sigma)", c as f64 / DRAWS as f64))?;
        }
    }
    ensure(worst_sum < 1e-9, || format!("probabilities sum off by {worst_sum:e}"))?;
    Ok(format!("20 models, |sum - 1| <= {worst_sum:.1e}, max deviation {worst_sigma:.2} sigma"))
}

fn run(id: usize, name: &str, results: &mut Vec<bool>, f: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{secs:.1}s]"),
        Err(detail) => println!("FAIL {id:>2} {name}: {detail} [{secs:.1}s]"),
    }
    results.push(outcome.is_ok());
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet`; only a name filter matters here
    if std::env::args().skip(1).any(|a| a == "--list") {
        return;
    }
    let mut results = Vec::new();
    let limit = |secs: u64, f: fn() -> Check| {
        move || {
            let start = Instant::now();
            let out = f()?;
            ensure(start.elapsed() < Duration::from_secs(secs), || format!("{out}; over the {secs}s budget"))?;
            Ok(out)
        }
    };
    run(1, "invertibility", &mut results, limit(10, invertibility));
    run(3, "masking", &mut results, masking);
    run(4, "autoregressive", &mut results, autoregressive);
    run(5, "jacobian", &mut results, jacobian);
    run(6, "gradients", &mut results, limit(60, gradients));
    run(13, "category probabilities", &mut results, category_probabilities);

    let data = molecules(500, 7);
    let mut trained = None;
    run(7, "training", &mut results, || training(&data, &mut trained));
    let trained = trained.unwrap_or_else(untrained);
    run(2, "reconstruction", &mut results, || {
        let start = Instant::now();
        let out = reconstruction(&trained, &data)?;
        ensure(start.elapsed() < Duration::from_secs(30), || format!("{out}; over the 30s budget"))?;
        Ok(out)
    });
    run(8, "validity with check", &mut results, || validity_with_check(&trained));
    run(9, "validity without check", &mut results, || validity_without_check(&trained));
    let mut finetuned = None;
    run(10, "ppo", &mut results, || ppo(&trained, &mut finetuned));
    let finetuned = finetuned.unwrap_or_else(|| trained.clone());
    run(11, "constrained optimization", &mut results, || constrained(&finetuned, &data));
    run(12, "mmd", &mut results, limit(300, community_mmd));

    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
