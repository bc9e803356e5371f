mod common;

use common::{bfs_molecules, random_model, rng};
use graphaf_core::flow::{
    forward_transform, generation_steps, inverse_transform, train, GraphAF, ModelConfig, Step,
    TrainConfig,
};
use graphaf_core::graph::{dequantize, quantize, MolecularGraph, PrefixGraph};
use graphaf_core::rgcn::bind;
use graphaf_core::FlowError;
use graphaf_tensor::{grad_check, Tape, Tensor};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn transforms_by_hand() {
    assert_eq!(
        forward_transform(&[0.5, -1.0], &[1.0, 2.0], &[2.0, 3.0]),
        vec![2.0, -1.0]
    );
    assert_eq!(
        inverse_transform(&[2.0, -1.0], &[1.0, 2.0], &[2.0, 3.0]),
        vec![0.5, -1.0]
    );
    assert_eq!(
        forward_transform(&[0.3, 0.7], &[0.0, 0.0], &[1.0, 1.0]),
        vec![0.3, 0.7]
    );
}

proptest! {
    #[test]
    fn transforms_invert(
        eps in prop::collection::vec(-5.0f64..5.0, 1..6),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let mu: Vec<f64> = eps.iter().map(|_| r.random_range(-3.0..3.0)).collect();
        let alpha: Vec<f64> = eps.iter().map(|_| (r.random_range(-7.0f64..7.0)).exp()).collect();
        let back = inverse_transform(&forward_transform(&eps, &mu, &alpha), &mu, &alpha);
        for (a, b) in back.iter().zip(&eps) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn identity_model_is_standard_normal() {
    let model = GraphAF::new(ModelConfig::new(3, 3), &mut rng(1)).unwrap();
    for g in bfs_molecules(5, 10, 2) {
        let z = dequantize(&g, 3, &mut rng(3));
        let ll = model.log_likelihood_parallel(&g, &z, 12).unwrap();
        let steps = generation_steps(g.n(), 12, 0);
        let expected: f64 = steps
            .iter()
            .flat_map(|s| match *s {
                Step::Node(i) => z.node(i).to_vec(),
                Step::Edge(i, j) => z.edge(i, j).to_vec(),
            })
            .map(|x| -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * x * x)
            .sum();
        assert_eq!(ll.log_det, 0.0);
        assert!(
            (ll.total - expected).abs() < 1e-9,
            "{} vs {}",
            ll.total,
            expected
        );
    }
}

#[test]
fn heads_start_at_identity_and_stay_positive() {
    let model = GraphAF::new(ModelConfig::new(3, 3), &mut rng(4)).unwrap();
    let c = model.node_conditional(&[0.3; 32]).unwrap();
    assert_eq!(c.mu, vec![0.0; 3]);
    assert_eq!(c.alpha, vec![1.0; 3]);
    let c = model
        .edge_conditional(&[0.1; 32], &[0.2; 32], &[-0.4; 32])
        .unwrap();
    assert_eq!((c.mu.len(), c.alpha), (4, vec![1.0; 4]));

    let mut r = rng(5);
    for draw in 0..10_000 {
        let mut cfg = ModelConfig::new(3, 3);
        cfg.hidden = 4;
        cfg.layers = 1;
        let mut m = GraphAF::new(cfg, &mut r).unwrap();
        m.perturb(if draw % 2 == 0 { 1.0 } else { 50.0 }, &mut r);
        let x: Vec<f64> = (0..4).map(|_| r.random_range(-10.0..10.0)).collect();
        let a = m.node_conditional(&x).unwrap().alpha;
        let e = m.edge_conditional(&x, &x, &x).unwrap().alpha;
        assert!(a.iter().chain(&e).all(|&v| v > 0.0 && v.is_finite()));
    }
}

#[test]
fn parallel_matches_sequential() {
    let model = random_model(16, 0.3, 6);
    let graphs = bfs_molecules(50, 12, 7);
    let mut r = rng(8);
    for g in &graphs {
        let z = dequantize(g, 3, &mut r);
        let par = model.log_likelihood_parallel(g, &z, 12).unwrap();
        let seq = model.log_likelihood_sequential(g, &z, 12).unwrap();
        assert!(
            (par.total - seq.total).abs() < 1e-9,
            "{} vs {}",
            par.total,
            seq.total
        );
        assert_eq!(par.steps, seq.steps);
        for (a, b) in par.per_step.iter().zip(&seq.per_step) {
            assert!((a - b).abs() < 1e-12);
        }
        let sum: f64 = par.per_step.iter().sum();
        assert!((sum - par.total).abs() < 1e-9);
        assert!((par.log_det - seq.log_det).abs() < 1e-9);
    }
}

#[test]
fn small_window_excludes_far_slots() {
    let model = random_model(8, 0.3, 9);
    let g = MolecularGraph::from_bonds(vec![0; 4], 3, &[(0, 1, 0), (1, 2, 0), (2, 3, 0)]).unwrap();
    let z = dequantize(&g, 3, &mut rng(10));
    let ll = model.log_likelihood_parallel(&g, &z, 1).unwrap();
    assert_eq!(ll.steps.len(), 4 + 3);
    let seq = model.log_likelihood_sequential(&g, &z, 1).unwrap();
    assert!((ll.total - seq.total).abs() < 1e-9);
}

#[test]
fn rejects_non_bfs_and_window_violations() {
    let model = random_model(8, 0.3, 11);
    // 0-1, 0-2, 1-3, 2-4 with 3 and 4 swapped
    let g =
        MolecularGraph::from_bonds(vec![0; 5], 3, &[(0, 1, 0), (0, 2, 0), (1, 4, 0), (2, 3, 0)])
            .unwrap();
    let z = dequantize(&g, 3, &mut rng(12));
    assert_eq!(
        model.log_likelihood_parallel(&g, &z, 12),
        Err(FlowError::NotBfsOrdered(4))
    );
    let star =
        MolecularGraph::from_bonds(vec![0; 4], 3, &[(0, 1, 0), (0, 2, 0), (0, 3, 0)]).unwrap();
    let z = dequantize(&star, 3, &mut rng(13));
    assert_eq!(
        model.log_likelihood_parallel(&star, &z, 2),
        Err(FlowError::WindowExceeded {
            i: 3,
            j: 0,
            window: 2
        })
    );
}

#[test]
fn inverse_then_decode_round_trips() {
    let model = random_model(16, 0.3, 14);
    for g in bfs_molecules(20, 12, 15) {
        let z = dequantize(&g, 3, &mut rng(16));
        let latent = model.inverse(&z, 12).unwrap();
        let (back, zb) = model.decode(&latent).unwrap();
        assert_eq!(back, g);
        assert!(zb.zx.iter().zip(&z.zx).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(quantize(&zb).unwrap(), g);
    }
}

#[test]
fn later_perturbations_leave_earlier_latents_unchanged() {
    let model = random_model(16, 0.3, 17);
    let mut r = rng(18);
    for g in bfs_molecules(50, 12, 19) {
        if g.n() < 2 {
            continue;
        }
        let z = dequantize(&g, 3, &mut r);
        let base = model.inverse(&z, 12).unwrap();
        // perturb the node-type choice of a later node
        let cut = r.random_range(1..g.n());
        let mut z2 = z.clone();
        let row = z2.node_mut(cut);
        let t = (0..3).find(|&k| row[k] >= 1.0).unwrap();
        row[t] -= 1.0;
        row[(t + 1) % 3] += 1.0;
        let other = model.inverse(&z2, 12).unwrap();
        let first = base
            .steps
            .iter()
            .position(|s| *s == Step::Node(cut))
            .unwrap();
        assert_eq!(base.eps[..first], other.eps[..first]);
        assert_ne!(base.eps[first], other.eps[first]);
    }
}

/// Determinant by partial-pivot LU.
fn log_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
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

#[test]
fn jacobian_is_triangular_with_matching_log_det() {
    let mut cfg = ModelConfig::new(2, 1);
    cfg.hidden = 8;
    let mut r = rng(20);
    let mut model = GraphAF::new(cfg, &mut r).unwrap();
    model.perturb(0.5, &mut r);
    let g = MolecularGraph::from_bonds(vec![1, 0], 1, &[(0, 1, 0)]).unwrap();
    let z0 = dequantize(&g, 2, &mut r);
    let flat = |z: &graphaf_core::graph::DequantizedGraph| [z.zx.clone(), z.za.clone()].concat();
    let eps_of = |v: &[f64]| {
        let mut z = z0.clone();
        z.zx.copy_from_slice(&v[..4]);
        z.za.copy_from_slice(&v[4..]);
        model.inverse(&z, 12).unwrap().eps.concat()
    };
    let x = flat(&z0);
    let h = 1e-6;
    let mut jac = vec![vec![0.0; 6]; 6];
    for c in 0..6 {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up[c] += h;
        dn[c] -= h;
        let (eu, ed) = (eps_of(&up), eps_of(&dn));
        for row in 0..6 {
            jac[row][c] = (eu[row] - ed[row]) / (2.0 * h);
        }
    }
    for (row, line) in jac.iter().enumerate() {
        for (c, v) in line.iter().enumerate() {
            if c > row {
                assert!(v.abs() < 1e-8, "J[{row}][{c}] = {v}");
            }
        }
    }
    let analytic = model.log_likelihood_parallel(&g, &z0, 12).unwrap().log_det;
    let numeric = log_abs_det(jac);
    assert!(analytic.abs() > 0.1);
    assert!(
        ((analytic - numeric) / analytic).abs() < 1e-4,
        "{analytic} vs {numeric}"
    );
}

#[test]
fn full_model_gradient_check() {
    let model = random_model(8, 0.3, 21);
    let g = MolecularGraph::from_bonds(vec![0, 2, 1], 3, &[(0, 1, 0), (0, 2, 1)]).unwrap();
    let z = dequantize(&g, 3, &mut rng(22));
    let params: Vec<Tensor> = model
        .store()
        .entries()
        .iter()
        .map(|e| e.tensor.clone())
        .collect();
    let report = grad_check(
        |tape, vars| {
            let ll = model
                .log_likelihood_on_tape(tape, vars, &g, &z, 12)
                .map_err(|e| match e {
                    FlowError::Tensor(t) => t,
                    other => panic!("{other}"),
                })?;
            Ok(tape.neg(ll))
        },
        &params,
        1e-5,
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
    assert!(report.checked > 500);
}

#[test]
fn batch_encoding_equals_single_prefixes() {
    let model = random_model(16, 0.3, 23);
    for g in bfs_molecules(20, 12, 24) {
        let sizes: Vec<usize> = (1..=g.n()).collect();
        let batch = model.encode_prefix_batch(&g, &sizes).unwrap();
        for (&m, emb) in sizes.iter().zip(&batch) {
            let single = model.encode(&PrefixGraph::nodes(&g, m)).unwrap();
            assert_eq!(&single, emb);
        }
        assert_eq!(
            batch.last().unwrap(),
            &model.encode(&PrefixGraph::nodes(&g, g.n())).unwrap()
        );
        // changing the last node leaves all shorter prefixes untouched
        let mut g2 = g.clone();
        g2.set_node_type(g.n() - 1, (g.node_type(g.n() - 1) + 1) % 3);
        let other = model.encode_prefix_batch(&g2, &sizes).unwrap();
        assert_eq!(batch[..g.n() - 1], other[..g.n() - 1]);
    }
}

#[test]
fn encoder_is_permutation_equivariant() {
    let model = random_model(16, 0.3, 25);
    let mut r = rng(26);
    for g in bfs_molecules(20, 6, 27).into_iter().filter(|g| g.n() == 6) {
        let mut perm: Vec<usize> = (0..6).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut r);
        let a = model.encode(&PrefixGraph::nodes(&g, 6)).unwrap();
        let b = model
            .encode(&PrefixGraph::nodes(&g.permute(&perm), 6))
            .unwrap();
        for (new, &old) in perm.iter().enumerate() {
            for c in 0..16 {
                assert!((a.h.at(old, c) - b.h.at(new, c)).abs() < 1e-12);
            }
        }
        for (x, y) in a.graph_embedding.iter().zip(&b.graph_embedding) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn single_node_and_zero_weights() {
    let mut cfg = ModelConfig::new(3, 3);
    cfg.layers = 1;
    cfg.hidden = 4;
    let model = GraphAF::new(cfg.clone(), &mut rng(28)).unwrap();
    let g = MolecularGraph::new(vec![1], 3);
    let emb = model.encode(&PrefixGraph::nodes(&g, 1)).unwrap();
    // A = I for every relation: H = mean_r relu(W_r[type])
    let layout = model.rgcn_layout();
    let eps = cfg.bn_eps;
    for c in 0..4 {
        let mean: f64 = layout.weights[0]
            .iter()
            .map(|&w| model.store().tensor(w).at(1, c).max(0.0))
            .sum::<f64>()
            / 4.0;
        assert_eq!(emb.h_raw.at(0, c), mean);
        assert!((emb.h.at(0, c) - mean / (1.0 + eps).sqrt()).abs() < 1e-15);
    }

    let mut zero = model.clone();
    for e in zero.store_mut().entries_mut() {
        if e.name.starts_with("rgcn.layer") {
            e.tensor = Tensor::zeros(e.tensor.shape());
        }
        if e.name == "rgcn.bn.beta" {
            e.tensor = Tensor::full(&[1, 4], 0.25);
        }
    }
    let big = MolecularGraph::from_bonds(vec![0, 1, 2], 3, &[(0, 1, 0), (1, 2, 1)]).unwrap();
    let emb = zero.encode(&PrefixGraph::nodes(&big, 3)).unwrap();
    assert!(emb.h_raw.data().iter().all(|&v| v == 0.0));
    assert!(emb
        .graph_embedding
        .iter()
        .all(|&v| (v - 0.75).abs() < 1e-15));
}

#[test]
fn empty_prefix_is_an_error() {
    let model = random_model(8, 0.1, 29);
    assert!(model
        .encode(&PrefixGraph::nodes(&MolecularGraph::new(vec![0], 3), 0))
        .is_err());
}

#[test]
fn one_graph_training_improves_and_is_deterministic() {
    let g = bfs_molecules(1, 8, 30).remove(0);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 1,
        seed: 31,
        ..TrainConfig::default()
    };
    let mut cfg_model = ModelConfig::new(3, 3);
    cfg_model.hidden = 16;
    let mut a = GraphAF::new(cfg_model.clone(), &mut rng(32)).unwrap();
    let ra = train(&mut a, std::slice::from_ref(&g), &cfg).unwrap();
    assert_eq!(ra.epoch_nll.len(), 200);
    let head: f64 = ra.epoch_nll[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = ra.epoch_nll[190..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");

    let mut b = GraphAF::new(cfg_model, &mut rng(32)).unwrap();
    let rb = train(&mut b, std::slice::from_ref(&g), &cfg).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.store(), b.store());
}

#[test]
fn bind_covers_store() {
    let model = random_model(8, 0.1, 33);
    let mut tape = Tape::new();
    let vars = bind(&mut tape, model.store());
    assert_eq!(vars.len(), model.store().len());
}
