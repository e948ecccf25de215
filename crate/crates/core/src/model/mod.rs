//! Baseline and layout-induced networks assembled from the tensor ops.

mod config;
mod net;
mod scene;

pub use config::{
    convs_in_block, pool_of_block, shape_trace, Aggregation, ModelConfig, TraceRow, Variant, NUM_BLOCKS, SPATIAL_BLOCKS,
};
pub use net::{BlockCache, BranchCache, ForwardPass, Model, Phase};
pub use scene::SceneInputs;
