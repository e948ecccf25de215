//! 3×3×3 convolution, stride 1, zero padding 1 on every axis.
//!
//! Weights are stored `[kt][kh][kw][c_in][c_out]`, i.e. a `(27·c_in) × c_out`
//! row-major matrix, and the convolution runs as an im2col product.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{gemm, MatRef, Real, Shape4, Tensor4};
use crate::error::{LivrError, Result};

pub const TAPS: usize = 27;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlockParams<T> {
    pub c_in: usize,
    pub c_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvBlockParams<T> {
    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        Self { c_in, c_out, weight: vec![T::zero(); TAPS * c_in * c_out], bias: vec![T::zero(); c_out] }
    }

    /// He-normal weights, zero bias.
    pub fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(c_in, c_out);
        he_normal(&mut p.weight, TAPS * c_in, rng);
        p
    }

    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        conv3d(x, &self.weight, &self.bias, self.c_out)
    }

    pub fn backward(&self, x: &Tensor4<T>, gy: &Tensor4<T>) -> Result<ConvGrads<T>> {
        conv3d_backward(x, &self.weight, self.c_out, gy, true)
    }
}

pub(crate) fn he_normal<T: Real, R: Rng + ?Sized>(w: &mut [T], fan_in: usize, rng: &mut R) {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid std");
    for v in w {
        *v = T::of(normal.sample(rng));
    }
}

pub struct ConvGrads<T> {
    pub input: Option<Tensor4<T>>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

fn im2col<T: Real>(x: &Tensor4<T>) -> Vec<T> {
    let s = x.shape();
    let k = TAPS * s.c;
    let mut col = Vec::with_capacity(s.positions() * k);
    let src = x.data();
    let zeros = vec![T::zero(); 3 * s.c];
    for t in 0..s.t {
        for y in 0..s.h {
            for xx in 0..s.w {
                // x-1..=x+1 is contiguous in a (t, y) row; only the ends pad
                let lo = xx.saturating_sub(1);
                let hi = (xx + 2).min(s.w);
                let (pad_l, pad_r) = ((xx == 0) as usize * s.c, (xx + 1 == s.w) as usize * s.c);
                for dt in 0..3 {
                    for dy in 0..3 {
                        let (ti, yi) = (t + dt, y + dy);
                        if ti >= 1 && ti <= s.t && yi >= 1 && yi <= s.h {
                            let row = s.index(ti - 1, yi - 1, 0, 0);
                            col.extend_from_slice(&zeros[..pad_l]);
                            col.extend_from_slice(&src[row + lo * s.c..row + hi * s.c]);
                            col.extend_from_slice(&zeros[..pad_r]);
                        } else {
                            col.extend_from_slice(&zeros);
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Real>(col: &[T], s: Shape4) -> Tensor4<T> {
    let k = TAPS * s.c;
    let mut out = Tensor4::zeros(s);
    let dst = out.data_mut();
    let mut rows = col.chunks_exact(k);
    for t in 0..s.t {
        for y in 0..s.h {
            for xx in 0..s.w {
                let src = rows.next().expect("one im2col row per position");
                let lo = xx.saturating_sub(1);
                let hi = (xx + 2).min(s.w);
                let skip = (xx == 0) as usize * s.c;
                for (j, taps) in src.chunks_exact(3 * s.c).enumerate() {
                    let (ti, yi) = (t + j / 3, y + j % 3);
                    if ti >= 1 && ti <= s.t && yi >= 1 && yi <= s.h {
                        let row = s.index(ti - 1, yi - 1, 0, 0);
                        for (d, &v) in dst[row + lo * s.c..row + hi * s.c].iter_mut().zip(&taps[skip..]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    out
}

fn check_weights<T>(c_in: usize, weight: &[T], c_out: usize) -> Result<()> {
    if weight.len() != TAPS * c_in * c_out {
        return Err(LivrError::ShapeMismatch(format!(
            "conv weight has {} values, expected 27x{c_in}x{c_out}",
            weight.len()
        )));
    }
    Ok(())
}

/// Cross-correlation with a 3×3×3 kernel; output has the input's extent.
pub fn conv3d<T: Real>(x: &Tensor4<T>, weight: &[T], bias: &[T], c_out: usize) -> Result<Tensor4<T>> {
    let s = x.shape();
    check_weights(s.c, weight, c_out)?;
    if bias.len() != c_out {
        return Err(LivrError::ShapeMismatch(format!("conv bias has {} values, expected {c_out}", bias.len())));
    }
    let p = s.positions();
    let mut out = Vec::with_capacity(p * c_out);
    for _ in 0..p {
        out.extend_from_slice(bias);
    }
    let col = im2col(x);
    gemm(MatRef::new(&col, p, TAPS * s.c), MatRef::new(weight, TAPS * s.c, c_out), T::one(), &mut out);
    Tensor4::from_vec(s.with_c(c_out), out)
}

pub fn conv3d_backward<T: Real>(
    x: &Tensor4<T>,
    weight: &[T],
    c_out: usize,
    gy: &Tensor4<T>,
    input_grad: bool,
) -> Result<ConvGrads<T>> {
    let s = x.shape();
    check_weights(s.c, weight, c_out)?;
    if gy.shape() != s.with_c(c_out) {
        return Err(LivrError::ShapeMismatch(format!("conv gradient {} vs output {}", gy.shape(), s.with_c(c_out))));
    }
    let p = s.positions();
    let k = TAPS * s.c;
    let g = MatRef::new(gy.data(), p, c_out);

    let mut gb = vec![T::zero(); c_out];
    for row in gy.data().chunks_exact(c_out) {
        for (b, &v) in gb.iter_mut().zip(row) {
            *b += v;
        }
    }

    let col = im2col(x);
    let mut gw = vec![T::zero(); k * c_out];
    gemm(MatRef::new(&col, p, k).t(), g, T::zero(), &mut gw);

    let input = if input_grad {
        let mut gcol = col;
        gemm(g, MatRef::new(weight, k, c_out).t(), T::zero(), &mut gcol);
        Some(col2im(&gcol, s))
    } else {
        None
    };
    Ok(ConvGrads { input, weight: gw, bias: gb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Direct six-loop convolution used as an independent reference.
    fn naive(x: &Tensor4<f64>, w: &[f64], b: &[f64], co: usize) -> Tensor4<f64> {
        let s = x.shape();
        let mut out = Tensor4::zeros(s.with_c(co));
        for t in 0..s.t as isize {
            for y in 0..s.h as isize {
                for xx in 0..s.w as isize {
                    for o in 0..co {
                        let mut acc = b[o];
                        for dt in -1..=1isize {
                            for dy in -1..=1isize {
                                for dx in -1..=1isize {
                                    let (ti, yi, xi) = (t + dt, y + dy, xx + dx);
                                    if ti < 0 || yi < 0 || xi < 0 || ti >= s.t as isize || yi >= s.h as isize || xi >= s.w as isize {
                                        continue;
                                    }
                                    let tap = ((dt + 1) * 9 + (dy + 1) * 3 + (dx + 1)) as usize;
                                    for ci in 0..s.c {
                                        acc += x.get(ti as usize, yi as usize, xi as usize, ci) * w[(tap * s.c + ci) * co + o];
                                    }
                                }
                            }
                        }
                        out.set(t as usize, y as usize, xx as usize, o, acc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let mut p = ConvBlockParams::<f64>::zeros(1, 1);
        p.weight[13] = 1.0;
        let data: Vec<f64> = (0..2 * 3 * 4).map(|i| i as f64 * 0.5 - 3.0).collect();
        let x = Tensor4::from_vec(Shape4::new(2, 3, 4, 1), data).unwrap();
        assert_eq!(p.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut p = ConvBlockParams::<f64>::zeros(1, 1);
        p.bias[0] = 0.75;
        let x = Tensor4::filled(Shape4::new(2, 3, 3, 1), 1.0);
        let y = p.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = ConvBlockParams::<f64>::init(3, 4, &mut rng);
        let data: Vec<f64> = (0..3 * 4 * 5 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor4::from_vec(Shape4::new(3, 4, 5, 3), data).unwrap();
        let mut b = p.clone();
        b.bias = vec![0.1, -0.2, 0.3, 0.0];
        let fast = b.forward(&x).unwrap();
        let slow = naive(&x, &b.weight, &b.bias, 4);
        for (a, c) in fast.data().iter().zip(slow.data()) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let x = Tensor4::<f64>::zeros(Shape4::new(1, 2, 2, 3));
        assert!(conv3d(&x, &[0.0; 27], &[0.0], 1).is_err());
        let p = ConvBlockParams::<f64>::zeros(3, 2);
        let bad = Tensor4::zeros(Shape4::new(1, 2, 2, 3));
        assert!(p.backward(&x, &bad).is_err());
    }
}
