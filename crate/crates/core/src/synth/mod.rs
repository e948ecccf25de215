//! Procedural front-yard scenes, agent trajectories and rendered clips with
//! ground-truth labels.

mod clip;
mod dataset;
pub mod oracle;
mod scene;

pub use clip::{footprint, gen_clip, render, AgentSprite, LabeledClip, MAX_ATTEMPTS};
pub use dataset::{
    decode_clip, generate, mix_seed, read_clip, write_clip, ClipRecord, Dataset, DatasetSpec, GenStats, Manifest,
    SceneRecord, CLIP_MAGIC, CLIP_VERSION, MANIFEST_FORMAT,
};
pub use oracle::label_oracle;
pub use scene::{gen_scene, Layout, Rect, SynthConfig, SynthScene};

#[cfg(test)]
mod tests;
