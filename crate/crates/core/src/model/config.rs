use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};
use crate::layout::PlaceCategory;
use crate::tensor::pool::PoolKind;
use crate::tensor::Shape4;
use crate::topology::PlaceSet;

/// Number of conv blocks in every network.
pub const NUM_BLOCKS: usize = 9;
/// Blocks `1..=SPATIAL_BLOCKS` pool spatially, the rest temporally.
pub const SPATIAL_BLOCKS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Raw frames through a single network.
    BL1,
    /// Raw frames plus six binary place maps as extra input channels.
    BL2,
    /// Place decomposition.
    V1,
    /// Place decomposition and topological aggregation.
    V2,
    /// Place decomposition and distance-based discretization.
    V3,
    /// Decomposition, discretization and topological aggregation.
    V4,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::BL1, Variant::BL2, Variant::V1, Variant::V2, Variant::V3, Variant::V4];

    pub fn is_baseline(self) -> bool {
        matches!(self, Variant::BL1 | Variant::BL2)
    }

    pub fn discretizes(self) -> bool {
        matches!(self, Variant::V3 | Variant::V4)
    }

    pub fn default_aggregation(self) -> Aggregation {
        match self {
            Variant::V2 | Variant::V4 => Aggregation::Topo,
            _ => Aggregation::Fc1,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Variant {
    type Err = LivrError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| LivrError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// How place descriptions are combined into action scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// One fully connected layer over all descriptions.
    #[serde(rename = "fc-1layer")]
    Fc1,
    /// Two fully connected layers with a ReLU hidden layer of `6·filters`.
    #[serde(rename = "fc-2layer")]
    Fc2,
    /// Gated layer restricted to places within `h` hops, in training and test.
    Topo,
    /// All-ones gate during training, scene gates at test time.
    TopoTestOnly,
}

impl Aggregation {
    pub const ALL: [Aggregation; 4] = [Aggregation::Fc1, Aggregation::Fc2, Aggregation::Topo, Aggregation::TopoTestOnly];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Fc1 => "fc-1layer",
            Aggregation::Fc2 => "fc-2layer",
            Aggregation::Topo => "topo",
            Aggregation::TopoTestOnly => "topo-test-only",
        }
    }

    pub fn gated_in_training(self) -> bool {
        self == Aggregation::Topo
    }

    pub fn gated_in_eval(self) -> bool {
        matches!(self, Aggregation::Topo | Aggregation::TopoTestOnly)
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = LivrError;

    fn from_str(s: &str) -> Result<Self> {
        Aggregation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| LivrError::InvalidConfig(format!("unknown aggregation {s:?}")))
    }
}

fn default_pl_dt() -> PlaceSet {
    [PlaceCategory::Walkway, PlaceCategory::Driveway, PlaceCategory::Lawn].into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Decomposition level: features are split by place after block `L`;
    /// `0` masks the input frames.
    #[serde(rename = "L")]
    pub l: usize,
    pub k: usize,
    pub h: usize,
    #[serde(rename = "PL_DT", default = "default_pl_dt")]
    pub pl_dt: PlaceSet,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    #[serde(default)]
    pub share_part_weights: bool,
    /// Overrides the variant's default head.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
}

impl ModelConfig {
    /// Full-size network on 15 frames of 90×160.
    pub fn full(variant: Variant) -> Self {
        Self {
            variant,
            l: 2,
            k: 3,
            h: 1,
            pl_dt: default_pl_dt(),
            frames: 15,
            height: 90,
            width: 160,
            filters: 64,
            share_part_weights: false,
            aggregation: None,
        }
    }

    /// Desk-scale network on 8 frames of 36×64 with 8 filters.
    pub fn desk(variant: Variant) -> Self {
        Self { frames: 8, height: 36, width: 64, filters: 8, ..Self::full(variant) }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LivrError::InvalidConfig(m));
        if self.l > SPATIAL_BLOCKS {
            return bad(format!("L = {} exceeds the {SPATIAL_BLOCKS} spatial blocks", self.l));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.frames == 0 || self.height == 0 || self.width == 0 || self.filters == 0 {
            return bad("frames, height, width and filters must be positive".into());
        }
        if self.variant.is_baseline() && self.aggregation.is_some_and(|a| a != Aggregation::Fc1 && a != Aggregation::Fc2) {
            return bad(format!("{} has no place descriptions to gate", self.variant));
        }
        Ok(())
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation.unwrap_or(self.variant.default_aggregation())
    }

    /// Places split into distance parts; empty unless the variant discretizes.
    pub fn effective_pl_dt(&self) -> PlaceSet {
        if self.variant.discretizes() {
            self.pl_dt
        } else {
            PlaceSet::EMPTY
        }
    }

    /// Number of parts feeding the branch of `p`.
    pub fn parts(&self, p: PlaceCategory) -> usize {
        if self.effective_pl_dt().contains(p) {
            self.k
        } else {
            1
        }
    }

    pub fn input_channels(&self) -> usize {
        if self.variant == Variant::BL2 {
            3 + crate::layout::NUM_PLACES
        } else {
            3
        }
    }

    pub fn input_shape(&self) -> Shape4 {
        Shape4::new(self.frames, self.height, self.width, self.input_channels())
    }

    /// Spatial size `(height, width)` of the output of block `n` (`0` is the input).
    pub fn spatial_after(&self, n: usize) -> (usize, usize) {
        let mut s = Shape4::new(1, self.height, self.width, 1);
        for _ in 0..n.min(SPATIAL_BLOCKS) {
            s = PoolKind::Spatial.output_shape(s);
        }
        (s.h, s.w)
    }

    /// Resolution of the maps that decompose features.
    pub fn layer_resolution(&self) -> (usize, usize) {
        self.spatial_after(self.l)
    }

    /// Length of the vector entering the classification head.
    pub fn feature_len(&self) -> usize {
        if self.variant.is_baseline() {
            self.filters
        } else {
            crate::layout::NUM_PLACES * self.filters
        }
    }
}

pub fn convs_in_block(n: usize) -> usize {
    if n <= 2 {
        1
    } else {
        2
    }
}

pub fn pool_of_block(n: usize) -> PoolKind {
    if n <= SPATIAL_BLOCKS {
        PoolKind::Spatial
    } else {
        PoolKind::Temporal
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub layer: String,
    pub shape: Shape4,
}

/// Layer-by-layer output shapes of one clip. For decomposed variants the
/// rows follow a single place branch, then the concatenated descriptions.
pub fn shape_trace(cfg: &ModelConfig) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut push = |layer: String, shape: Shape4| rows.push(TraceRow { layer, shape });
    let mut s = cfg.input_shape();
    push("input".into(), s);
    if !cfg.variant.is_baseline() && cfg.l == 0 {
        push("decompose".into(), s);
    }
    let n_actions = crate::topology::ActionCatalog::standard().len();
    for n in 1..=NUM_BLOCKS {
        for j in 0..convs_in_block(n) {
            s = s.with_c(cfg.filters);
            push(format!("conv{n}{}", if convs_in_block(n) == 1 { "" } else { ["a", "b"][j] }), s);
        }
        s = pool_of_block(n).output_shape(s);
        push(format!("pool{n}"), s);
        if !cfg.variant.is_baseline() && n == cfg.l {
            push("decompose".into(), s);
        }
    }
    push("sgmp".into(), Shape4::new(1, 1, 1, s.c));
    push("concat".into(), Shape4::new(1, 1, 1, cfg.feature_len()));
    push("fc".into(), Shape4::new(1, 1, 1, n_actions));
    Ok(rows)
}
