use serde::Serialize;

use super::config::ModelConfig;
use crate::error::{LivrError, Result};
use crate::geometry::{discretize_place, distance_transform, part_mask, scene_anchor, AnchorSpec, PartIndexMap};
use crate::layout::{downsample_map, place_mask, rasterize_scene, BitMask, PlaceCategory, SceneAnnotation, SegmentationMap, NUM_PLACES};
use crate::topology::{action_place_matrix, adjacency, ActionCatalog, GateMatrix, PlaceAdjacency};

/// Everything a model needs to know about one scene, computed once from its
/// segmentation and reused for every clip of that scene.
#[derive(Clone, Debug, Serialize)]
pub struct SceneInputs {
    /// Segmentation at the decomposition layer's resolution.
    pub layer_map: SegmentationMap,
    /// Per place (id order), the masks of the parts feeding its branch. A
    /// place that is not discretized has a single mask covering all of it.
    pub branch_masks: Vec<Vec<BitMask>>,
    /// Part maps of the discretized places.
    pub part_maps: Vec<Option<PartIndexMap>>,
    pub adjacency: PlaceAdjacency,
    pub gate: GateMatrix,
    /// Binary place maps at input resolution, extra input channels of `BL2`.
    pub input_maps: Option<Vec<BitMask>>,
}

impl SceneInputs {
    pub fn prepare(ann: &SceneAnnotation, cfg: &ModelConfig, catalog: &ActionCatalog) -> Result<Self> {
        let full = rasterize_scene(ann, ann.image_width as usize, ann.image_height as usize)?;
        let anchor = scene_anchor(&full, ann.porch_line, (ann.image_width, ann.image_height)).ok();
        Self::from_map(&full, anchor.as_ref(), cfg, catalog)
    }

    /// Builds the inputs from a full-resolution map. The anchor is only
    /// required when some present place is discretized.
    pub fn from_map(
        full: &SegmentationMap,
        anchor: Option<&AnchorSpec>,
        cfg: &ModelConfig,
        catalog: &ActionCatalog,
    ) -> Result<Self> {
        cfg.validate()?;
        let (lh, lw) = cfg.layer_resolution();
        let layer_map = downsample_map(full, lw, lh)?;
        let pl_dt = cfg.effective_pl_dt();
        let needs_field = pl_dt.iter().any(|p| layer_map.contains(p));
        let field = if needs_field {
            let anchor = anchor.ok_or(LivrError::MissingAnchor)?;
            Some(distance_transform(full, anchor)?.downsample_min(lw, lh)?)
        } else {
            None
        };

        let mut branch_masks = Vec::with_capacity(NUM_PLACES);
        let mut part_maps = Vec::with_capacity(NUM_PLACES);
        for p in PlaceCategory::ALL {
            if pl_dt.contains(p) {
                let pim = match &field {
                    Some(f) if layer_map.contains(p) => discretize_place(&layer_map, f, p, cfg.k)?,
                    _ => PartIndexMap::empty(lw, lh, cfg.k),
                };
                branch_masks.push((0..cfg.k).map(|i| part_mask(&pim, i)).collect::<Result<Vec<_>>>()?);
                part_maps.push(Some(pim));
            } else {
                branch_masks.push(vec![place_mask(&layer_map, p)]);
                part_maps.push(None);
            }
        }

        let adj = adjacency(full);
        let gate = action_place_matrix(&adj, catalog, cfg.h);
        let input_maps = if cfg.input_channels() > 3 {
            let m = downsample_map(full, cfg.width, cfg.height)?;
            Some(PlaceCategory::ALL.iter().map(|&p| place_mask(&m, p)).collect())
        } else {
            None
        };
        Ok(Self { layer_map, branch_masks, part_maps, adjacency: adj, gate, input_maps })
    }

    pub fn layer_size(&self) -> (usize, usize) {
        (self.layer_map.height(), self.layer_map.width())
    }
}
