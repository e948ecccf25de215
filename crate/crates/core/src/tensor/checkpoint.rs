//! Parameter checkpoint container.
//!
//! A checkpoint is a single JSON document:
//!
//! ```text
//! {
//!   "format": "livr-checkpoint",
//!   "version": 1,
//!   "config": { ... model configuration ... },
//!   "params": [ { "name": "trunk.block1.conv0.w", "shape": [27, 3, 8], "data": [ ... ] }, ... ],
//!   "adam": { "config": { "lr", "beta1", "beta2", "eps" }, "step": 120,
//!             "m": [[ ... ], ...], "v": [[ ... ], ...] } | null,
//!   "meta": { ... free-form training metadata ... }
//! }
//! ```
//!
//! Parameters appear in model construction order; values are stored as
//! 64-bit floats whatever precision the model ran in. `m`/`v` follow the
//! order of `params`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::params::ParamStore;
use super::Real;
use crate::error::{LivrError, Result};

pub const FORMAT: &str = "livr-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamRecord {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: serde_json::Value,
    pub params: Vec<NamedArray>,
    pub adam: Option<AdamRecord>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

impl Checkpoint {
    pub fn new<T: Real>(
        config: serde_json::Value,
        store: &ParamStore<T>,
        adam: Option<&AdamState<T>>,
        meta: serde_json::Value,
    ) -> Self {
        let params = store
            .entries()
            .iter()
            .map(|e| NamedArray { name: e.name.clone(), shape: e.shape.clone(), data: to_f64(&e.data) })
            .collect();
        let adam = adam.map(|a| AdamRecord {
            config: a.config,
            step: a.step,
            m: a.m.iter().map(|m| to_f64(m)).collect(),
            v: a.v.iter().map(|v| to_f64(v)).collect(),
        });
        Self { format: FORMAT.into(), version: VERSION, config, params, adam, meta }
    }

    pub fn store<T: Real>(&self) -> ParamStore<T> {
        let mut s = ParamStore::new();
        for p in &self.params {
            s.add(p.name.clone(), p.shape.clone(), from_f64(&p.data));
        }
        s
    }

    pub fn adam_state<T: Real>(&self) -> Option<AdamState<T>> {
        self.adam.as_ref().map(|a| AdamState {
            config: a.config,
            step: a.step,
            m: a.m.iter().map(|m| from_f64(m)).collect(),
            v: a.v.iter().map(|v| from_f64(v)).collect(),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(LivrError::Format(format!("unsupported checkpoint {} v{}", c.format, c.version)));
        }
        for p in &c.params {
            if p.shape.iter().product::<usize>() != p.data.len() {
                return Err(LivrError::Format(format!("parameter {} has inconsistent shape", p.name)));
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
