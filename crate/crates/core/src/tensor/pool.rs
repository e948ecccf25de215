//! Decoupled max pooling: spatial-only (1×2×2) and temporal-only (2×1×1),
//! window equal to stride, ceiling mode on odd extents.

use serde::{Deserialize, Serialize};

use super::{Real, Shape4, Tensor4};
use crate::error::{LivrError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Spatial,
    Temporal,
}

impl PoolKind {
    fn window(self) -> (usize, usize, usize) {
        match self {
            PoolKind::Spatial => (1, 2, 2),
            PoolKind::Temporal => (2, 1, 1),
        }
    }

    pub fn output_shape(self, s: Shape4) -> Shape4 {
        let (kt, kh, kw) = self.window();
        Shape4::new(s.t.div_ceil(kt), s.h.div_ceil(kh), s.w.div_ceil(kw), s.c)
    }
}

/// Pooled values plus, per output element, the flat input index that won.
pub struct Pooled<T> {
    pub output: Tensor4<T>,
    pub argmax: Vec<usize>,
}

pub fn maxpool<T: Real>(x: &Tensor4<T>, kind: PoolKind) -> Pooled<T> {
    let s = x.shape();
    let (kt, kh, kw) = kind.window();
    let os = kind.output_shape(s);
    let mut out = Vec::with_capacity(os.len());
    let mut argmax = Vec::with_capacity(os.len());
    let src = x.data();
    for ot in 0..os.t {
        for oy in 0..os.h {
            for ox in 0..os.w {
                for c in 0..s.c {
                    let mut best = usize::MAX;
                    let mut best_v = T::neg_infinity();
                    // Scan order t, y, x; strict `>` keeps the first maximum.
                    for t in ot * kt..((ot + 1) * kt).min(s.t) {
                        for y in oy * kh..((oy + 1) * kh).min(s.h) {
                            for xx in ox * kw..((ox + 1) * kw).min(s.w) {
                                let i = s.index(t, y, xx, c);
                                if best == usize::MAX || src[i] > best_v {
                                    best = i;
                                    best_v = src[i];
                                }
                            }
                        }
                    }
                    out.push(best_v);
                    argmax.push(best);
                }
            }
        }
    }
    Pooled { output: Tensor4::from_vec(os, out).expect("pool output shape"), argmax }
}

pub fn maxpool_spatial<T: Real>(x: &Tensor4<T>) -> Pooled<T> {
    maxpool(x, PoolKind::Spatial)
}

pub fn maxpool_temporal<T: Real>(x: &Tensor4<T>) -> Pooled<T> {
    maxpool(x, PoolKind::Temporal)
}

/// Routes each output gradient to the input element that produced the max.
pub fn maxpool_backward<T: Real>(input_shape: Shape4, argmax: &[usize], gy: &Tensor4<T>) -> Result<Tensor4<T>> {
    if gy.data().len() != argmax.len() {
        return Err(LivrError::ShapeMismatch(format!(
            "pool gradient has {} values, expected {}",
            gy.data().len(),
            argmax.len()
        )));
    }
    let mut gx = Tensor4::zeros(input_shape);
    let dst = gx.data_mut();
    for (&i, &g) in argmax.iter().zip(gy.data()) {
        dst[i] += g;
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_halves_with_ceil() {
        let x = Tensor4::filled(Shape4::new(3, 5, 7, 2), 1.5f64);
        let s = maxpool_spatial(&x);
        assert_eq!(s.output.shape(), Shape4::new(3, 3, 4, 2));
        assert!(s.output.data().iter().all(|&v| v == 1.5));
        let t = maxpool_temporal(&x);
        assert_eq!(t.output.shape(), Shape4::new(2, 5, 7, 2));
    }

    #[test]
    fn five_spatial_pools_trace() {
        let mut s = Shape4::new(15, 90, 160, 64);
        let mut trace = vec![];
        for _ in 0..5 {
            s = PoolKind::Spatial.output_shape(s);
            trace.push((s.h, s.w));
        }
        assert_eq!(trace, vec![(45, 80), (23, 40), (12, 20), (6, 10), (3, 5)]);
        for _ in 0..4 {
            s = PoolKind::Temporal.output_shape(s);
        }
        assert_eq!(s, Shape4::new(1, 3, 5, 64));
    }

    #[test]
    fn ties_route_to_first() {
        let x = Tensor4::filled(Shape4::new(1, 2, 2, 1), 2.0f64);
        let p = maxpool_spatial(&x);
        assert_eq!(p.argmax, vec![0]);
        let gy = Tensor4::filled(Shape4::new(1, 1, 1, 1), 1.0);
        let gx = maxpool_backward(x.shape(), &p.argmax, &gy).unwrap();
        assert_eq!(gx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }
}
