use thiserror::Error;

use crate::layout::PlaceCategory;

pub type Result<T, E = LivrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LivrError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("region {region} is a degenerate polygon with {points} points (need at least 3)")]
    DegeneratePolygon { region: usize, points: usize },

    #[error("unknown place category `{0}`")]
    UnknownCategory(String),

    #[error("missing anchor: the map has no anchor cells and no anchor line was given")]
    MissingAnchor,

    #[error("empty place: {0} does not occur in the map")]
    EmptyPlace(PlaceCategory),

    #[error("place not in scene: {0}")]
    PlaceNotInScene(PlaceCategory),

    #[error("part index {index} out of range for k = {k}")]
    PartOutOfRange { index: usize, k: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
