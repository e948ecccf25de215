//! Element-wise and reduction ops: ReLU, place decomposition, spatial global
//! max pooling, channel concatenation, (gated) fully connected layers and the
//! sigmoid binary cross-entropy loss.

use rand::Rng;

use super::conv::he_normal;
use super::{Real, Shape4, Tensor4};
use crate::error::{LivrError, Result};
use crate::layout::BitMask;
use crate::topology::WeightMask;

pub fn relu<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| v.max(T::zero()))
}

/// Gradient of ReLU given its output: passes where the output is positive.
pub fn relu_backward<T: Real>(y: &Tensor4<T>, gy: &Tensor4<T>) -> Tensor4<T> {
    let data = y
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
        .collect();
    Tensor4::from_vec(gy.shape(), data).expect("same shape")
}

/// `out[t,y,x,c] = x[t,y,x,c] · mask[y,x]`. The backward pass is the same
/// operation applied to the upstream gradient.
pub fn decompose<T: Real>(x: &Tensor4<T>, mask: &BitMask) -> Result<Tensor4<T>> {
    let s = x.shape();
    if mask.width() != s.w || mask.height() != s.h {
        return Err(LivrError::ShapeMismatch(format!(
            "mask {}x{} vs feature map {}x{}",
            mask.width(),
            mask.height(),
            s.w,
            s.h
        )));
    }
    let mut out = Tensor4::zeros(s);
    let bits = mask.bits();
    let plane = s.h * s.w;
    for t in 0..s.t {
        for (cell, &on) in bits.iter().enumerate() {
            if on {
                let i = (t * plane + cell) * s.c;
                out.data_mut()[i..i + s.c].copy_from_slice(&x.data()[i..i + s.c]);
            }
        }
    }
    Ok(out)
}

pub fn decompose_backward<T: Real>(gy: &Tensor4<T>, mask: &BitMask) -> Result<Tensor4<T>> {
    decompose(gy, mask)
}

/// Per-channel maximum over all cells of a single-frame tensor, plus the flat
/// index of each winner (first in scan order on ties).
pub fn sgmp<T: Real>(x: &Tensor4<T>) -> Result<(Vec<T>, Vec<usize>)> {
    let s = x.shape();
    if s.t != 1 {
        return Err(LivrError::ShapeMismatch(format!("SGMP expects one frame, got {}", s.t)));
    }
    let mut best = vec![T::neg_infinity(); s.c];
    let mut arg = vec![usize::MAX; s.c];
    for (cell, row) in x.data().chunks_exact(s.c).enumerate() {
        for c in 0..s.c {
            if arg[c] == usize::MAX || row[c] > best[c] {
                best[c] = row[c];
                arg[c] = cell * s.c + c;
            }
        }
    }
    Ok((best, arg))
}

pub fn sgmp_backward<T: Real>(shape: Shape4, argmax: &[usize], gy: &[T]) -> Tensor4<T> {
    let mut gx = Tensor4::zeros(shape);
    for (&i, &g) in argmax.iter().zip(gy) {
        gx.data_mut()[i] += g;
    }
    gx
}

/// Concatenates equally shaped (up to channels) tensors along channels.
pub fn concat_channels<T: Real>(parts: &[Tensor4<T>]) -> Result<Tensor4<T>> {
    let first = parts.first().ok_or_else(|| LivrError::ShapeMismatch("nothing to concatenate".into()))?.shape();
    let total: usize = parts.iter().map(|p| p.shape().c).sum();
    for p in parts {
        let s = p.shape();
        if (s.t, s.h, s.w) != (first.t, first.h, first.w) {
            return Err(LivrError::ShapeMismatch(format!("cannot concatenate {s} with {first}")));
        }
    }
    let mut out = Vec::with_capacity(first.positions() * total);
    for pos in 0..first.positions() {
        for p in parts {
            let c = p.shape().c;
            out.extend_from_slice(&p.data()[pos * c..(pos + 1) * c]);
        }
    }
    Tensor4::from_vec(first.with_c(total), out)
}

/// Inverse of [`concat_channels`] for gradients.
pub fn split_channels<T: Real>(x: &Tensor4<T>, widths: &[usize]) -> Vec<Tensor4<T>> {
    let s = x.shape();
    assert_eq!(widths.iter().sum::<usize>(), s.c);
    let mut outs: Vec<Vec<T>> = widths.iter().map(|&c| Vec::with_capacity(s.positions() * c)).collect();
    for row in x.data().chunks_exact(s.c) {
        let mut off = 0;
        for (o, &c) in outs.iter_mut().zip(widths) {
            o.extend_from_slice(&row[off..off + c]);
            off += c;
        }
    }
    outs.into_iter()
        .zip(widths)
        .map(|(d, &c)| Tensor4::from_vec(s.with_c(c), d).expect("split shape"))
        .collect()
}

/// `y = (W ⊙ M) f + b` with `W` row-major `n_out × f.len()`. Without a mask
/// this is a plain affine layer.
pub fn linear<T: Real>(weight: &[T], bias: &[T], mask: Option<&[bool]>, f: &[T]) -> Result<Vec<T>> {
    let n_out = bias.len();
    let n_in = f.len();
    if weight.len() != n_out * n_in || mask.is_some_and(|m| m.len() != weight.len()) {
        return Err(LivrError::ShapeMismatch(format!(
            "linear layer {}x{} applied to a {n_in}-vector",
            n_out,
            weight.len() / n_out.max(1)
        )));
    }
    let mut y = bias.to_vec();
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &weight[i * n_in..(i + 1) * n_in];
        match mask {
            Some(m) => {
                let mrow = &m[i * n_in..(i + 1) * n_in];
                for j in 0..n_in {
                    if mrow[j] {
                        *yi += row[j] * f[j];
                    }
                }
            }
            None => {
                for j in 0..n_in {
                    *yi += row[j] * f[j];
                }
            }
        }
    }
    Ok(y)
}

pub struct LinearGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub input: Vec<T>,
}

/// Backward of [`linear`]: `∇W = (∇y fᵀ) ⊙ M`, `∇b = ∇y`, `∇f = (W ⊙ M)ᵀ ∇y`.
/// Masked weight positions receive exactly zero.
pub fn linear_backward<T: Real>(weight: &[T], mask: Option<&[bool]>, f: &[T], gy: &[T]) -> LinearGrads<T> {
    let n_in = f.len();
    let mut gw = vec![T::zero(); weight.len()];
    let mut gf = vec![T::zero(); n_in];
    for (i, &g) in gy.iter().enumerate() {
        let row = &weight[i * n_in..(i + 1) * n_in];
        let grow = &mut gw[i * n_in..(i + 1) * n_in];
        for j in 0..n_in {
            if mask.is_none_or(|m| m[i * n_in + j]) {
                grow[j] = g * f[j];
                gf[j] += row[j] * g;
            }
        }
    }
    LinearGrads { weight: gw, bias: gy.to_vec(), input: gf }
}

/// A gated fully connected layer bound to one fixed mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedFcParams<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub mask: WeightMask,
}

impl<T: Real> GatedFcParams<T> {
    /// Random weights with masked positions zeroed, zero bias.
    pub fn init<R: Rng + ?Sized>(mask: WeightMask, rng: &mut R) -> Self {
        let mut weight = vec![T::zero(); mask.rows * mask.cols];
        he_normal(&mut weight, mask.cols, rng);
        let mut p = Self { weight, bias: vec![T::zero(); mask.rows], mask };
        p.apply_mask();
        p
    }

    pub fn apply_mask(&mut self) {
        for (w, &on) in self.weight.iter_mut().zip(&self.mask.bits) {
            if !on {
                *w = T::zero();
            }
        }
    }

    pub fn forward(&self, f: &[T]) -> Result<Vec<T>> {
        if f.len() != self.mask.cols {
            return Err(LivrError::ShapeMismatch(format!(
                "gated layer expects {} features, got {}",
                self.mask.cols,
                f.len()
            )));
        }
        linear(&self.weight, &self.bias, Some(&self.mask.bits), f)
    }

    pub fn backward(&self, f: &[T], gy: &[T]) -> LinearGrads<T> {
        linear_backward(&self.weight, Some(&self.mask.bits), f, gy)
    }
}

/// Mean over outputs of the logistic loss, computed as
/// `max(y,0) − y·l + log(1 + e^{−|y|})`. Returns the loss and `∂loss/∂y`.
pub fn sigmoid_bce<T: Real>(logits: &[T], labels: &[T]) -> Result<(T, Vec<T>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(LivrError::ShapeMismatch(format!(
            "{} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let n = T::of(logits.len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&y, &l) in logits.iter().zip(labels) {
        loss += y.max(T::zero()) - y * l + (-y.abs()).exp().ln_1p();
        grad.push((sigmoid(y) - l) / n);
    }
    Ok((loss / n, grad))
}

pub fn sigmoid<T: Real>(y: T) -> T {
    if y >= T::zero() {
        T::one() / (T::one() + (-y).exp())
    } else {
        let e = y.exp();
        e / (T::one() + e)
    }
}
