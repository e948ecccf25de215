use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};
use crate::synth::Manifest;

/// Observed scenes (trained and validated on) and unseen scenes (tested on).
/// Clips of each observed scene alternate between training and validation,
/// giving a 1:1 split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub observed: Vec<String>,
    pub unseen: Vec<String>,
}

/// Clip indices of a manifest assigned to each role.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub unseen: Vec<usize>,
}

impl SplitSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn partition(&self, manifest: &Manifest) -> Result<Partition> {
        if let Some(s) = self.observed.iter().find(|s| self.unseen.contains(s)) {
            return Err(LivrError::InvalidConfig(format!("scene {s} is both observed and unseen")));
        }
        for s in self.observed.iter().chain(&self.unseen) {
            if !manifest.scenes.iter().any(|r| &r.id == s) {
                return Err(LivrError::InvalidConfig(format!("split names unknown scene {s}")));
            }
        }
        let mut p = Partition::default();
        let mut seen_in_scene = std::collections::HashMap::<&str, usize>::new();
        for (i, c) in manifest.clips.iter().enumerate() {
            if self.observed.contains(&c.scene) {
                let k = seen_in_scene.entry(c.scene.as_str()).or_default();
                if *k % 2 == 0 {
                    p.train.push(i);
                } else {
                    p.val.push(i);
                }
                *k += 1;
            } else if self.unseen.contains(&c.scene) {
                p.unseen.push(i);
            }
        }
        for (name, set) in [("train", &p.train), ("validation", &p.val), ("unseen", &p.unseen)] {
            if set.is_empty() {
                return Err(LivrError::EmptySplit(name.into()));
            }
        }
        Ok(p)
    }

    /// Actions lacking positives among the observed or the unseen clips.
    pub fn unbalanced_actions(&self, manifest: &Manifest) -> Vec<usize> {
        let n = manifest.actions.len();
        let (mut obs, mut uns) = (vec![false; n], vec![false; n]);
        for c in &manifest.clips {
            let target = if self.observed.contains(&c.scene) {
                &mut obs
            } else if self.unseen.contains(&c.scene) {
                &mut uns
            } else {
                continue;
            };
            for (t, &l) in target.iter_mut().zip(&c.labels) {
                *t |= l == 1;
            }
        }
        (0..n).filter(|&a| !obs[a] || !uns[a]).collect()
    }
}
