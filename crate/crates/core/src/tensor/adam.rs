use serde::{Deserialize, Serialize};

use super::ops::{GatedFcParams, LinearGrads};
use super::params::{Grads, ParamStore};
use super::Real;
use crate::error::{LivrError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are created lazily on the first
/// step and must keep the parameters' shapes afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update over parallel lists of parameter and gradient slices.
    pub fn step_slices(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(LivrError::ShapeMismatch(format!(
                "{} parameters vs {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if self.m.get(i).map(Vec::len) != Some(p.len()) || g.len() != p.len() {
                return Err(LivrError::ShapeMismatch(format!("parameter {i} changed shape between Adam steps")));
            }
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        let one = T::one();
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_store(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>) -> Result<()> {
        let mut params: Vec<&mut [T]> = store.entries_mut().iter_mut().map(|e| e.data.as_mut_slice()).collect();
        let grads: Vec<&[T]> = grads.data.iter().map(Vec::as_slice).collect();
        self.step_slices(&mut params, &grads)
    }
}

impl<T: Real> GatedFcParams<T> {
    /// Adam update followed by re-zeroing the masked weights.
    pub fn adam_step(&mut self, grads: &LinearGrads<T>, state: &mut AdamState<T>) -> Result<()> {
        state.step_slices(&mut [&mut self.weight, &mut self.bias], &[&grads.weight, &grads.bias])?;
        self.apply_mask();
        Ok(())
    }
}
