//! Layout-induced video representations for place-centric action recognition.
//!
//! The crate turns a scene's place segmentation into geometry (distance
//! fields, part maps) and topology (place adjacency, action-place gates) and
//! uses both to shape a small 3D convolutional network trained on clips of
//! agents moving through the scene.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod layout;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod topology;

pub use error::{LivrError, Result};
