//! Probability that `argmax_c (mu_c + alpha_c * eps_c)` picks a category when
//! `eps ~ N(0, I)`.
//!
//! With `Z_c ~ N(mu_c, alpha_c^2)` independent,
//! `P(c) = ∫ f_c(z) Π_{k≠c} F_k(z) dz` where `f`/`F` are the normal pdf/cdf.
//! The one-dimensional integral is evaluated by adaptive Gauss–Kronrod
//! (7/15) over panels split at `mu_k + {0, ±1, ±2, ±4, ±8} alpha_k`, and the
//! derivatives with respect to every `mu_k`, `alpha_k` are integrated
//! alongside. Probabilities are normalized by their numerical sum.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SPAN: f64 = 12.0;
const ABS_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 40;
const TINY: f64 = 1e-300;

fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Log-probability of one category with its gradient.
#[derive(Debug, Clone)]
pub struct CategoryLogProb {
    pub log_prob: f64,
    pub dmu: Vec<f64>,
    pub dalpha: Vec<f64>,
}

/// Normalized category probabilities. Panics on mismatched lengths or
/// non-positive scales.
pub fn probabilities(mu: &[f64], alpha: &[f64]) -> Vec<f64> {
    let raw = integrate(mu, alpha, false);
    let c = mu.len();
    let total: f64 = (0..c).map(|k| raw[k * stride(c, false)]).sum();
    (0..c).map(|k| raw[k * stride(c, false)] / total).collect()
}

/// `log P(target)` and its derivatives.
pub fn log_prob_with_grad(mu: &[f64], alpha: &[f64], target: usize) -> CategoryLogProb {
    let c = mu.len();
    let st = stride(c, true);
    let raw = integrate(mu, alpha, true);
    let total: f64 = (0..c).map(|k| raw[k * st]).sum();
    let p = raw[target * st].max(TINY);
    let mut dmu = vec![0.0; c];
    let mut dalpha = vec![0.0; c];
    for j in 0..c {
        let dtot_mu: f64 = (0..c).map(|k| raw[k * st + 1 + j]).sum();
        let dtot_alpha: f64 = (0..c).map(|k| raw[k * st + 1 + c + j]).sum();
        dmu[j] = raw[target * st + 1 + j] / p - dtot_mu / total;
        dalpha[j] = raw[target * st + 1 + c + j] / p - dtot_alpha / total;
    }
    CategoryLogProb {
        log_prob: p.ln() - total.ln(),
        dmu,
        dalpha,
    }
}

fn stride(c: usize, grad: bool) -> usize {
    if grad {
        1 + 2 * c
    } else {
        1
    }
}

/// Integrand vector at `z`: per category `[P_c, dP_c/dmu_*, dP_c/dalpha_*]`.
fn integrand(mu: &[f64], alpha: &[f64], z: f64, grad: bool, out: &mut [f64], scratch: &mut Scratch) {
    let c = mu.len();
    let st = stride(c, grad);
    for k in 0..c {
        let u = (z - mu[k]) / alpha[k];
        scratch.u[k] = u;
        scratch.f[k] = pdf(u) / alpha[k];
        scratch.big_f[k] = cdf(u);
    }
    for t in 0..c {
        // product of the other cdfs, and the same product with one factor left out
        let mut prod = 1.0;
        for k in 0..c {
            if k != t {
                prod *= scratch.big_f[k];
            }
        }
        let base = scratch.f[t] * prod;
        out[t * st] = base;
        if !grad {
            continue;
        }
        for j in 0..c {
            let (dm, da) = if j == t {
                let u = scratch.u[t];
                (base * u / alpha[t], base * (u * u - 1.0) / alpha[t])
            } else {
                let mut rest = scratch.f[t];
                for k in 0..c {
                    if k != t && k != j {
                        rest *= scratch.big_f[k];
                    }
                }
                let dfj = scratch.f[j];
                (-rest * dfj, -rest * dfj * scratch.u[j])
            };
            out[t * st + 1 + j] = dm;
            out[t * st + 1 + c + j] = da;
        }
    }
}

struct Scratch {
    u: Vec<f64>,
    f: Vec<f64>,
    big_f: Vec<f64>,
    buf: Vec<f64>,
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(
    mu: &[f64],
    alpha: &[f64],
    a: f64,
    b: f64,
    grad: bool,
    scratch: &mut Scratch,
    kron: &mut [f64],
    gauss: &mut [f64],
) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    kron.iter_mut().for_each(|v| *v = 0.0);
    gauss.iter_mut().for_each(|v| *v = 0.0);
    let mut buf = std::mem::take(&mut scratch.buf);
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let points: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sign in points {
            integrand(mu, alpha, center + sign * half * x, grad, &mut buf, scratch);
            for (k, v) in buf.iter().enumerate() {
                kron[k] += wk * v;
                // odd-indexed Kronrod nodes are the Gauss nodes
                if i % 2 == 1 {
                    gauss[k] += WG[i / 2] * v;
                }
            }
        }
    }
    scratch.buf = buf;
    kron.iter_mut().for_each(|v| *v *= half);
    gauss.iter_mut().for_each(|v| *v *= half);
}

fn integrate(mu: &[f64], alpha: &[f64], grad: bool) -> Vec<f64> {
    let c = mu.len();
    assert_eq!(c, alpha.len(), "mu/alpha length");
    assert!(c > 0, "no categories");
    assert!(alpha.iter().all(|&a| a > 0.0), "non-positive scale");
    let width = c * stride(c, grad);
    if c == 1 {
        let mut out = vec![0.0; width];
        out[0] = 1.0;
        return out;
    }
    let lo = (0..c).map(|k| mu[k] - SPAN * alpha[k]).fold(f64::INFINITY, f64::min);
    let hi = (0..c).map(|k| mu[k] + SPAN * alpha[k]).fold(f64::NEG_INFINITY, f64::max);
    let mut breaks = vec![lo, hi];
    for k in 0..c {
        for s in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
            let p = mu[k] + s * alpha[k];
            if p > lo && p < hi {
                breaks.push(p);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut scratch = Scratch {
        u: vec![0.0; c],
        f: vec![0.0; c],
        big_f: vec![0.0; c],
        buf: vec![0.0; width],
    };
    let mut total = vec![0.0; width];
    let mut kron = vec![0.0; width];
    let mut gauss = vec![0.0; width];
    let mut stack: Vec<(f64, f64, u32)> = breaks.windows(2).rev().map(|w| (w[0], w[1], 0)).collect();
    while let Some((a, b, depth)) = stack.pop() {
        gk15(mu, alpha, a, b, grad, &mut scratch, &mut kron, &mut gauss);
        let err = kron
            .iter()
            .zip(&gauss)
            .map(|(k, g)| (k - g).abs())
            .fold(0.0, f64::max);
        if err <= ABS_TOL || depth >= MAX_DEPTH {
            for (t, k) in total.iter_mut().zip(&kron) {
                *t += k;
            }
        } else {
            let m = 0.5 * (a + b);
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        }
    }
    total
}
