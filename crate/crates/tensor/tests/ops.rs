use graphaf_tensor::{
    grad_check, matmul, AdamConfig, AdamState, BatchNormMode, Result, Tape, Tensor, TensorError,
    Var,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const OP_TOL: f64 = 1e-6;

fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect())
}

/// Reduces any output to a scalar with fixed random weights so every output
/// element contributes a distinct amount to the checked gradient.
fn weighted_sum(tape: &mut Tape<'_>, v: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(v).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let w = tape.constant(w);
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

fn check(name: &str, params: &[Tensor], f: impl Fn(&mut Tape<'_>, &[Var]) -> Result<Var>) {
    let report = grad_check(
        |t: &mut Tape<'_>, v: &[Var]| {
            let out = f(t, v)?;
            weighted_sum(t, out, 99)
        },
        params,
        H,
    )
    .unwrap();
    assert!(
        report.max_rel_error < OP_TOL,
        "{name}: rel err {} at {:?} (analytic {}, numeric {})",
        report.max_rel_error,
        report.worst,
        report.analytic,
        report.numeric
    );
}

#[test]
fn relu_forward_and_backward() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::row(vec![-1.0, 2.0]));
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
    let s = tape.sum(y);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0]);
}

#[test]
fn identity_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = rand_tensor(&mut rng, 4, 3, -2.0, 2.0);
    assert_eq!(matmul(&Tensor::identity(4), &m).unwrap(), m);
}

#[test]
fn gaussian_logpdf_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::row(vec![0.0, 1.3]));
    let mu = tape.constant(Tensor::row(vec![0.0, 1.3]));
    let a = tape.constant(Tensor::row(vec![1.0, 2.5]));
    let lp = tape.gaussian_logpdf(x, mu, a).unwrap();
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((tape.value(lp).data()[0] + 0.918_938_533_204_672_7).abs() < 1e-15);
    assert!((tape.value(lp).data()[1] - (-half_ln_2pi - 2.5f64.ln())).abs() < 1e-15);
}

#[test]
fn gaussian_logpdf_rejects_non_positive_scale() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::row(vec![0.0]));
    let a = tape.constant(Tensor::row(vec![0.0]));
    assert!(matches!(
        tape.gaussian_logpdf(x, x, a),
        Err(TensorError::Domain { .. })
    ));
}

#[test]
fn shape_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[3, 2]));
    let err = tape.add(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
    assert!(tape.matmul(a, a).is_err());
}

#[test]
fn log_and_div_domain_errors() {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::row(vec![1.0, 0.0]));
    assert!(tape.log(z).is_err());
    let one = tape.constant(Tensor::row(vec![1.0, 1.0]));
    assert!(tape.div(one, z).is_err());
}

#[test]
fn every_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..5 {
        let a = rand_tensor(&mut rng, 3, 4, -2.0, 2.0);
        let b = rand_tensor(&mut rng, 3, 4, -2.0, 2.0);
        let pos = rand_tensor(&mut rng, 3, 4, 0.5, 2.0);
        let m = rand_tensor(&mut rng, 4, 2, -1.0, 1.0);
        let row = rand_tensor(&mut rng, 1, 4, -1.0, 1.0);
        let tag = |s: &str| format!("{s} (round {round})");

        check(&tag("add"), &[a.clone(), b.clone()], |t, v| t.add(v[0], v[1]));
        check(&tag("sub"), &[a.clone(), b.clone()], |t, v| t.sub(v[0], v[1]));
        check(&tag("mul"), &[a.clone(), b.clone()], |t, v| t.mul(v[0], v[1]));
        check(&tag("div"), &[a.clone(), pos.clone()], |t, v| t.div(v[0], v[1]));
        check(&tag("matmul"), &[a.clone(), m.clone()], |t, v| t.matmul(v[0], v[1]));
        check(&tag("exp"), std::slice::from_ref(&a), |t, v| Ok(t.exp(v[0])));
        check(&tag("log"), std::slice::from_ref(&pos), |t, v| t.log(v[0]));
        check(&tag("relu"), std::slice::from_ref(&a), |t, v| Ok(t.relu(v[0])));
        check(&tag("tanh"), std::slice::from_ref(&a), |t, v| Ok(t.tanh(v[0])));
        check(&tag("clamp"), std::slice::from_ref(&a), |t, v| Ok(t.clamp(v[0], -1.0, 1.0)));
        check(&tag("minimum"), &[a.clone(), b.clone()], |t, v| t.minimum(v[0], v[1]));
        check(&tag("scale"), std::slice::from_ref(&a), |t, v| Ok(t.scale(v[0], -1.7)));
        check(&tag("sum"), std::slice::from_ref(&a), |t, v| Ok(t.sum(v[0])));
        check(&tag("mean"), std::slice::from_ref(&a), |t, v| t.mean(v[0]));
        check(&tag("sum_rows"), std::slice::from_ref(&a), |t, v| t.sum_rows(v[0]));
        check(&tag("row_sums"), std::slice::from_ref(&a), |t, v| t.row_sums(v[0]));
        check(&tag("add_row"), &[a.clone(), row.clone()], |t, v| t.add_row(v[0], v[1]));
        check(&tag("add_n"), &[a.clone(), b.clone()], |t, v| t.add_n(&[v[0], v[1], v[0]]));
        check(&tag("concat rows"), &[a.clone(), b.clone()], |t, v| t.concat(&[v[0], v[1]], 0));
        check(&tag("concat cols"), &[a.clone(), b.clone()], |t, v| t.concat(&[v[0], v[1]], 1));
        check(&tag("slice_rows"), std::slice::from_ref(&a), |t, v| t.slice_rows(v[0], 1, 2));
        check(&tag("gather_rows"), std::slice::from_ref(&a), |t, v| t.gather_rows(v[0], &[2, 0, 2]));
        check(&tag("segment_sum"), std::slice::from_ref(&a), |t, v| {
            t.segment_sum(v[0], &[(0, 2), (2, 0), (1, 2)])
        });
        let blk = rand_tensor(&mut rng, 2, 2, -1.0, 1.0);
        let blk1 = rand_tensor(&mut rng, 1, 1, -1.0, 1.0);
        check(&tag("block_matmul"), std::slice::from_ref(&a), |t, v| {
            t.block_matmul(vec![(0, blk.clone()), (2, blk1.clone())], v[0])
        });
        check(&tag("gaussian_logpdf"), &[a.clone(), b.clone(), pos.clone()], |t, v| {
            t.gaussian_logpdf(v[0], v[1], v[2])
        });
        let gamma = rand_tensor(&mut rng, 1, 4, 0.5, 1.5);
        let beta = rand_tensor(&mut rng, 1, 4, -0.5, 0.5);
        check(&tag("batch_norm train"), &[a.clone(), gamma.clone(), beta.clone()], |t, v| {
            Ok(t.batch_norm(v[0], v[1], v[2], BatchNormMode::Train { eps: 1e-5 })?.0)
        });
        let (rm, rv) = (vec![0.1, -0.2, 0.0, 0.3], vec![1.5, 0.7, 1.0, 2.0]);
        check(&tag("batch_norm eval"), &[a.clone(), gamma.clone(), beta.clone()], |t, v| {
            let mode = BatchNormMode::Eval {
                mean: &rm,
                var: &rv,
                eps: 1e-5,
            };
            Ok(t.batch_norm(v[0], v[1], v[2], mode)?.0)
        });
        let mu = rand_tensor(&mut rng, 1, 3, -1.0, 1.0);
        let al = rand_tensor(&mut rng, 1, 3, 0.5, 1.5);
        for target in 0..3 {
            check(&tag("argmax_log_prob"), &[mu.clone(), al.clone()], |t, v| {
                t.argmax_log_prob(v[0], v[1], target)
            });
        }
    }
}

#[test]
fn shared_subexpressions_sum_over_paths() {
    // f(x) = sum((x*x) + (x*x)) built with one shared node vs. two duplicated ones.
    let x0 = Tensor::row(vec![0.3, -1.2, 2.0]);
    let shared = {
        let mut t = Tape::new();
        let x = t.param(x0.clone());
        let sq = t.mul(x, x).unwrap();
        let s = t.add(sq, sq).unwrap();
        let l = t.sum(s);
        t.backward(l).unwrap().get(x).unwrap().clone()
    };
    let duplicated = {
        let mut t = Tape::new();
        let x = t.param(x0.clone());
        let sq1 = t.mul(x, x).unwrap();
        let sq2 = t.mul(x, x).unwrap();
        let s = t.add(sq1, sq2).unwrap();
        let l = t.sum(s);
        t.backward(l).unwrap().get(x).unwrap().clone()
    };
    assert_eq!(shared, duplicated);
    let expected: Vec<f64> = x0.data().iter().map(|v| 4.0 * v).collect();
    assert_eq!(shared.data(), expected.as_slice());
}

#[test]
fn grad_check_on_quadratic_form() {
    // f(x) = x^T Q x with Q symmetric positive definite
    let q = Tensor::matrix(3, 3, vec![2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 3.0]);
    let x = Tensor::matrix(3, 1, vec![0.4, -0.7, 1.1]);
    let report = grad_check(
        |t, v| {
            let qv = t.constant(q.clone());
            let qx = t.matmul(qv, v[0])?;
            let p = t.mul(v[0], qx)?;
            Ok(t.sum(p))
        },
        &[x],
        1e-4,
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-8, "{report:?}");
}

#[test]
fn adam_first_step_closed_form() {
    let cfg = AdamConfig {
        lr: 0.001,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let mut params = vec![Tensor::row(vec![0.5])];
    let mut adam = AdamState::new(cfg, &params);
    adam.step(&mut params, &[Tensor::row(vec![1.0])]).unwrap();
    // m_hat = 1, v_hat = 1 => delta = -lr / (1 + eps)
    let expected = 0.5 - 0.001 / (1.0 + 1e-8);
    assert!((params[0].data()[0] - expected).abs() < 1e-15);
}

#[test]
fn adam_zero_gradient_leaves_parameter() {
    let mut params = vec![Tensor::row(vec![0.25, -3.0])];
    let mut adam = AdamState::new(AdamConfig::default(), &params);
    adam.step(&mut params, &[Tensor::zeros(&[1, 2])]).unwrap();
    assert_eq!(params[0].data(), &[0.25, -3.0]);
}

#[test]
fn adam_converges_on_parabola() {
    let cfg = AdamConfig {
        lr: 0.05,
        ..AdamConfig::default()
    };
    let mut params = vec![Tensor::scalar(1.0)];
    let mut adam = AdamState::new(cfg, &params);
    for _ in 0..200 {
        let g = Tensor::scalar(2.0 * params[0].item());
        adam.step(&mut params, &[g]).unwrap();
    }
    assert!(params[0].item().abs() < 0.05, "theta = {}", params[0].item());
}

#[test]
fn adam_rejects_nan_gradient_by_name() {
    let mut store = graphaf_tensor::ParamStore::new();
    store.push("w", Tensor::row(vec![1.0]), true);
    store.push("b", Tensor::row(vec![1.0]), true);
    let mut adam = AdamState::for_store(AdamConfig::default(), &store);
    let err = adam
        .step_store(&mut store, &[Some(Tensor::row(vec![0.1])), Some(Tensor::row(vec![f64::NAN]))])
        .unwrap_err();
    assert!(err.to_string().contains("`b`"), "{err}");
    assert_eq!(store.tensor(0).data(), &[1.0]);
}

#[test]
fn forward_is_bit_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor(&mut rng, 5, 6, -1.0, 1.0);
        let b = rand_tensor(&mut rng, 6, 2, -1.0, 1.0);
        let mut t = Tape::new();
        let va = t.param(a);
        let vb = t.param(b);
        let m = t.matmul(va, vb).unwrap();
        let h = t.tanh(m);
        let s = t.sum(h);
        t.value(s).item().to_bits()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn checkpoint_round_trip_is_lossless(values in prop::collection::vec(-1e300f64..1e300, 1..40), scale in -30i32..30) {
        let mut store = graphaf_tensor::ParamStore::new();
        let n = values.len();
        let scaled: Vec<f64> = values.iter().map(|v| v * 10f64.powi(scale)).filter(|v| v.is_finite()).collect();
        let m = scaled.len();
        store.push("a.weight", Tensor::matrix(1, m, scaled), true);
        store.push("stats", Tensor::new(vec![n], values.clone()).unwrap(), false);
        let text = graphaf_tensor::checkpoint::save(&store);
        let back = graphaf_tensor::checkpoint::load(&text, &store).unwrap();
        for (x, y) in store.entries().iter().zip(back.entries()) {
            let bits_x: Vec<u64> = x.tensor.data().iter().map(|v| v.to_bits()).collect();
            let bits_y: Vec<u64> = y.tensor.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits_x, bits_y);
        }
    }
}

#[test]
fn checkpoint_rejects_schema_mismatch() {
    let mut store = graphaf_tensor::ParamStore::new();
    store.push("w", Tensor::zeros(&[2, 2]), true);
    let text = graphaf_tensor::checkpoint::save(&store);
    let mut other = graphaf_tensor::ParamStore::new();
    other.push("w", Tensor::zeros(&[2, 3]), true);
    assert!(graphaf_tensor::checkpoint::load(&text, &other).is_err());
    let mut renamed = graphaf_tensor::ParamStore::new();
    renamed.push("v", Tensor::zeros(&[2, 2]), true);
    assert!(graphaf_tensor::checkpoint::load(&text, &renamed).is_err());
    assert!(graphaf_tensor::checkpoint::load("nope\n", &store).is_err());
}
