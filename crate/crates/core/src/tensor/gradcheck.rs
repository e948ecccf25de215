//! Central finite-difference gradient checks for every differentiable op.
//!
//! Each check reduces the op's output to a scalar `L = Σ out ⊙ R` with a
//! fixed random `R`, perturbs every input coordinate by `±ε`, and compares
//! `(L(x+ε) − L(x−ε)) / 2ε` against the analytic gradient. The relative error
//! of one coordinate is `|a − n| / max(|a|, |n|, 1e-8)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::conv::{conv3d, conv3d_backward, TAPS};
use super::ops::{decompose, decompose_backward, linear, linear_backward, sgmp, sgmp_backward, sigmoid_bce};
use super::pool::{maxpool, maxpool_backward, PoolKind};
use super::{Shape4, Tensor4};
use crate::layout::BitMask;

pub const DEFAULT_EPS: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Maximum relative error between `analytic` and the central-difference
/// gradient of `f` at `x`.
pub fn gradcheck(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    numeric_gradient(f, x, eps)
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub op: String,
    pub shape: String,
    pub wrt: String,
    pub max_rel_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Values at least 0.01 apart in shuffled order, so no `±ε` probe can change
/// which element wins a max.
fn separated(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - n as f64 * 0.005 + rng.random_range(0.0..0.002)).collect();
    v.shuffle(rng);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_shape(rng: &mut ChaCha8Rng, max_t: usize, max_h: usize, max_w: usize, max_c: usize) -> Shape4 {
    Shape4::new(
        rng.random_range(1..=max_t),
        rng.random_range(1..=max_h),
        rng.random_range(1..=max_w),
        rng.random_range(1..=max_c),
    )
}

fn record(out: &mut Vec<CheckResult>, op: &str, shape: String, wrt: &str, err: f64) {
    out.push(CheckResult { op: op.into(), shape, wrt: wrt.into(), max_rel_error: err });
}

fn check_conv(rng: &mut ChaCha8Rng, s: Shape4, c_out: usize, eps: f64, out: &mut Vec<CheckResult>) {
    let x = uniform(rng, s.len());
    let w = uniform(rng, TAPS * s.c * c_out);
    let b = uniform(rng, c_out);
    let r = uniform(rng, s.positions() * c_out);
    let loss = |x: &[f64], w: &[f64], b: &[f64]| {
        let xt = Tensor4::from_vec(s, x.to_vec()).unwrap();
        dot(conv3d(&xt, w, b, c_out).unwrap().data(), &r)
    };
    let xt = Tensor4::from_vec(s, x.clone()).unwrap();
    let gy = Tensor4::from_vec(s.with_c(c_out), r.clone()).unwrap();
    let g = conv3d_backward(&xt, &w, c_out, &gy, true).unwrap();
    let label = format!("{s} -> {c_out}");
    let gx = g.input.unwrap();
    record(out, "conv3d", label.clone(), "input", gradcheck(|v| loss(v, &w, &b), &x, gx.data(), eps));
    record(out, "conv3d", label.clone(), "weight", gradcheck(|v| loss(&x, v, &b), &w, &g.weight, eps));
    record(out, "conv3d", label, "bias", gradcheck(|v| loss(&x, &w, v), &b, &g.bias, eps));
}

fn check_pool(rng: &mut ChaCha8Rng, s: Shape4, kind: PoolKind, eps: f64, out: &mut Vec<CheckResult>) {
    let x = separated(rng, s.len());
    let os = kind.output_shape(s);
    let r = uniform(rng, os.len());
    let loss = |x: &[f64]| dot(maxpool(&Tensor4::from_vec(s, x.to_vec()).unwrap(), kind).output.data(), &r);
    let p = maxpool(&Tensor4::from_vec(s, x.clone()).unwrap(), kind);
    let gx = maxpool_backward(s, &p.argmax, &Tensor4::from_vec(os, r.clone()).unwrap()).unwrap();
    let op = match kind {
        PoolKind::Spatial => "maxpool_spatial",
        PoolKind::Temporal => "maxpool_temporal",
    };
    record(out, op, s.to_string(), "input", gradcheck(loss, &x, gx.data(), eps));
}

fn check_decompose(rng: &mut ChaCha8Rng, s: Shape4, eps: f64, out: &mut Vec<CheckResult>) {
    let x = uniform(rng, s.len());
    let mask = BitMask::new(s.w, s.h, (0..s.h * s.w).map(|_| rng.random_bool(0.5)).collect()).unwrap();
    let r = uniform(rng, s.len());
    let loss = |x: &[f64]| dot(decompose(&Tensor4::from_vec(s, x.to_vec()).unwrap(), &mask).unwrap().data(), &r);
    let gx = decompose_backward(&Tensor4::from_vec(s, r.clone()).unwrap(), &mask).unwrap();
    record(out, "decompose", s.to_string(), "input", gradcheck(loss, &x, gx.data(), eps));
}

fn check_sgmp(rng: &mut ChaCha8Rng, s: Shape4, eps: f64, out: &mut Vec<CheckResult>) {
    let x = separated(rng, s.len());
    let r = uniform(rng, s.c);
    let loss = |x: &[f64]| dot(&sgmp(&Tensor4::from_vec(s, x.to_vec()).unwrap()).unwrap().0, &r);
    let (_, arg) = sgmp(&Tensor4::from_vec(s, x.clone()).unwrap()).unwrap();
    let gx = sgmp_backward(s, &arg, &r);
    record(out, "sgmp", s.to_string(), "input", gradcheck(loss, &x, gx.data(), eps));
}

fn check_gated_fc(rng: &mut ChaCha8Rng, n_out: usize, n_in: usize, eps: f64, out: &mut Vec<CheckResult>) {
    let w = uniform(rng, n_out * n_in);
    let b = uniform(rng, n_out);
    let f = uniform(rng, n_in);
    let mask: Vec<bool> = (0..n_out * n_in).map(|_| rng.random_bool(0.6)).collect();
    let r = uniform(rng, n_out);
    let loss = |w: &[f64], b: &[f64], f: &[f64]| dot(&linear(w, b, Some(&mask), f).unwrap(), &r);
    let g = linear_backward(&w, Some(&mask), &f, &r);
    let label = format!("{n_out}x{n_in}");
    record(out, "gated_fc", label.clone(), "weight", gradcheck(|v| loss(v, &b, &f), &w, &g.weight, eps));
    record(out, "gated_fc", label.clone(), "bias", gradcheck(|v| loss(&w, v, &f), &b, &g.bias, eps));
    record(out, "gated_fc", label, "input", gradcheck(|v| loss(&w, &b, v), &f, &g.input, eps));
}

fn check_bce(rng: &mut ChaCha8Rng, n: usize, eps: f64, out: &mut Vec<CheckResult>) {
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
    let l: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 }).collect();
    let (_, g) = sigmoid_bce(&y, &l).unwrap();
    let err = gradcheck(|v| sigmoid_bce(v, &l).unwrap().0, &y, &g, eps);
    record(out, "sigmoid_bce", n.to_string(), "logits", err);
}

/// Runs every op check on `shapes_per_op` random shapes (at least 5).
/// `n` pairwise distinct draws of `draw`.
fn distinct<S: PartialEq>(rng: &mut ChaCha8Rng, n: usize, mut draw: impl FnMut(&mut ChaCha8Rng) -> S) -> Vec<S> {
    let mut out: Vec<S> = Vec::with_capacity(n);
    while out.len() < n {
        let s = draw(rng);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Checks every op on at least five pairwise distinct random shapes.
pub fn run_suite(seed: u64, shapes_per_op: usize, eps: f64) -> Vec<CheckResult> {
    let n = shapes_per_op.max(5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let convs = distinct(&mut rng, n - 1, |r| (random_shape(r, 4, 5, 5, 3), r.random_range(1..=3)));
    for (s, co) in std::iter::once((Shape4::new(4, 5, 6, 2), 3)).chain(convs) {
        check_conv(&mut rng, s, co, eps, &mut out);
    }
    for kind in [PoolKind::Spatial, PoolKind::Temporal] {
        for s in distinct(&mut rng, n, |r| random_shape(r, 5, 5, 5, 3)) {
            check_pool(&mut rng, s, kind, eps, &mut out);
        }
    }
    for s in distinct(&mut rng, n, |r| random_shape(r, 3, 5, 5, 3)) {
        check_decompose(&mut rng, s, eps, &mut out);
    }
    for s in distinct(&mut rng, n, |r| random_shape(r, 1, 5, 5, 4)) {
        check_sgmp(&mut rng, s, eps, &mut out);
    }
    for (a, i) in distinct(&mut rng, n, |r| (r.random_range(1..=15), r.random_range(1..=24))) {
        check_gated_fc(&mut rng, a, i, eps, &mut out);
    }
    for k in distinct(&mut rng, n, |r| r.random_range(1..=15)) {
        check_bce(&mut rng, k, eps, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_tiny_error() {
        let x = [0.5, -1.5, 2.0];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let err = gradcheck(|v| v.iter().map(|a| a * a).sum(), &x, &analytic, DEFAULT_EPS);
        assert!(err < 1e-9);
    }

    #[test]
    fn detects_wrong_gradient() {
        let x = [1.0];
        assert!(gradcheck(|v| v[0] * v[0], &x, &[3.0], DEFAULT_EPS) > 0.1);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn suite_passes_for_every_op() {
        let results = run_suite(7, 5, DEFAULT_EPS);
        for op in ["conv3d", "maxpool_spatial", "maxpool_temporal", "decompose", "sgmp", "gated_fc", "sigmoid_bce"] {
            assert!(results.iter().filter(|r| r.op == op).count() >= 5, "{op}");
        }
        for r in &results {
            assert!(r.passed(), "{r:?}");
        }
    }
}
