//! Training, evaluation and ablation on synthetic datasets.

pub mod ablate;
pub mod ap;
pub mod eval;
pub mod split;
pub mod train;

pub use ablate::{ablate, AblationRun, Dimension};
pub use ap::{average_precision, mean_average_precision};
pub use eval::{comparison_csv, evaluate, ActionAp, EvalReport};
pub use split::{Partition, SplitSpec};
pub use train::{model_from_checkpoint, prepare_scenes, train, train_on, ClipView, EpochRecord, TrainConfig, TrainOutcome};
