use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};
use crate::geometry::{distance_transform, AnchorSpec, DistanceField};
use crate::layout::{rasterize_scene, validate_annotation, PlaceCategory, Region, SceneAnnotation, SegmentationMap};

/// Resolution and rendering parameters of generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Annotation pixels per clip pixel.
    pub annotation_scale: usize,
    /// Probability that a clip carries a second, independent agent.
    pub second_agent_prob: f64,
    /// Per-frame Gaussian pixel noise.
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { width: 64, height: 36, frames: 8, annotation_scale: 4, second_agent_prob: 0.25, noise_std: 0.02 }
    }
}

/// Axis-aligned rectangle `[x0, y0, x1, y1]`.
pub type Rect = [f64; 4];

/// Geometry the generator drew, in annotation pixels after mirroring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub street_bottom: f64,
    pub sidewalk_bottom: f64,
    pub porch: Rect,
    /// Walkway quadrilateral: bottom-left, bottom-right, top-right, top-left
    /// before mirroring.
    pub walkway: [[f64; 2]; 4],
    pub driveway: Rect,
    pub driveway_reaches_street: bool,
    pub mirrored: bool,
}

impl Layout {
    /// Walkway centerline from its far (sidewalk) end to the porch end.
    pub fn walkway_axis(&self) -> ([f64; 2], [f64; 2]) {
        let w = &self.walkway;
        let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        (mid(w[2], w[3]), mid(w[0], w[1]))
    }
}

/// A generated scene: its annotation, rasterizations and appearance.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub seed: u64,
    pub config: SynthConfig,
    pub annotation: SceneAnnotation,
    /// Segmentation at annotation resolution.
    pub map: SegmentationMap,
    /// Segmentation at clip resolution, used for rendering.
    pub clip_map: SegmentationMap,
    /// Distance to the porch at annotation resolution.
    pub porch_distance: DistanceField,
    pub layout: Layout,
    pub palette: [[f32; 3]; 6],
    /// Static textured background, `height × width × 3`.
    pub background: Vec<f32>,
}

impl SynthScene {
    pub fn id(&self) -> &str {
        &self.annotation.scene_id
    }

    /// Place under a point given in clip pixels, if any.
    pub fn place_at(&self, p: [f64; 2]) -> Option<PlaceCategory> {
        let s = self.config.annotation_scale as f64;
        let (x, y) = (p[0] * s, p[1] * s);
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (x, y) = (x as usize, y as usize);
        if x >= self.map.width() || y >= self.map.height() {
            return None;
        }
        PlaceCategory::from_id(self.map.get(x, y))
    }
}

fn rect_region(cat: PlaceCategory, r: Rect) -> Region {
    Region::new(cat, vec![[r[0], r[1]], [r[2], r[1]], [r[2], r[3]], [r[0], r[3]]])
}

fn mirror_rect(r: Rect, w: f64) -> Rect {
    [w - r[2], r[1], w - r[0], r[3]]
}

/// Samples a front-yard layout: street on top, sidewalk below it, lawn
/// filling the rest, a porch strip at the bottom, a walkway from the porch
/// to the sidewalk and a driveway running along one side of the porch.
pub fn gen_scene(seed: u64, cfg: &SynthConfig) -> Result<SynthScene> {
    if cfg.width < 16 || cfg.height < 16 || cfg.frames < 2 || cfg.annotation_scale == 0 {
        return Err(LivrError::InvalidConfig("synthetic clips need at least 16x16 pixels and 2 frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = cfg.annotation_scale;
    let (wi, hi) = (cfg.width * s, cfg.height * s);
    let (w, h) = (wi as f64, hi as f64);

    let street_bottom = rng.random_range(0.16..0.23) * h;
    let sidewalk_bottom = street_bottom + rng.random_range(0.15..0.2) * h;
    let porch_h = rng.random_range(0.2..0.27) * h;
    let porch_w = rng.random_range(0.28..0.38) * w;
    let drive_w = rng.random_range(0.18..0.25) * w;
    let porch_x = rng.random_range(0.04 * w..0.96 * w - porch_w - drive_w);
    let porch_y = h - porch_h;
    let reaches = rng.random_bool(0.5);
    let drive_top = if reaches { street_bottom } else { sidewalk_bottom };
    let porch: Rect = [porch_x, porch_y, porch_x + porch_w, h];
    let driveway: Rect = [porch_x + porch_w, drive_top, porch_x + porch_w + drive_w, h];

    let walk_w = rng.random_range(0.1..0.14) * w;
    let xb = rng.random_range(porch_x + 0.02 * w..porch_x + porch_w - walk_w - 0.02 * w);
    let xt = (xb + rng.random_range(-0.08..0.08) * w).clamp(0.02 * w, driveway[0] - walk_w - 0.04 * w);
    let walkway = [
        [xb, porch_y + 0.02 * h],
        [xb + walk_w, porch_y + 0.02 * h],
        [xt + walk_w, sidewalk_bottom - 0.01 * h],
        [xt, sidewalk_bottom - 0.01 * h],
    ];

    let mirrored = rng.random_bool(0.5);
    let mut layout = Layout {
        street_bottom,
        sidewalk_bottom,
        porch,
        walkway,
        driveway,
        driveway_reaches_street: reaches,
        mirrored,
    };
    if mirrored {
        layout.porch = mirror_rect(porch, w);
        layout.driveway = mirror_rect(driveway, w);
        for p in &mut layout.walkway {
            p[0] = w - p[0];
        }
    }

    use PlaceCategory::*;
    let regions = vec![
        rect_region(Street, [0.0, 0.0, w, street_bottom]),
        rect_region(Sidewalk, [0.0, street_bottom, w, sidewalk_bottom]),
        rect_region(Lawn, [0.0, sidewalk_bottom, w, h]),
        Region::new(Walkway, layout.walkway.to_vec()),
        rect_region(Driveway, layout.driveway),
        rect_region(Porch, layout.porch),
    ];
    let annotation = SceneAnnotation {
        scene_id: format!("scene-{seed:016x}"),
        image_width: wi as u32,
        image_height: hi as u32,
        regions,
        porch_line: None,
    };
    let diags = validate_annotation(&annotation);
    if !diags.is_empty() {
        return Err(LivrError::InvalidConfig(format!("generated annotation is invalid: {}", diags[0])));
    }
    let map = rasterize_scene(&annotation, wi, hi)?;
    let clip_map = rasterize_scene(&annotation, cfg.width, cfg.height)?;
    let porch_distance = distance_transform(&map, &AnchorSpec::Place(Porch))?;

    let mut palette = [[0f32; 3]; 6];
    for c in palette.iter_mut() {
        for v in c.iter_mut() {
            *v = rng.random_range(0.25..0.65);
        }
    }
    let mut background = Vec::with_capacity(cfg.width * cfg.height * 3);
    let stripe = rng.random_range(2.0..6.0f32);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let id = clip_map.get(x, y);
            let base = if id == 0 { [0.5; 3] } else { palette[id as usize - 1] };
            let wave = 0.03 * ((x as f32 + y as f32 * 0.5) / stripe).sin();
            for b in base {
                background.push(b + wave + rng.random_range(-0.04..0.04));
            }
        }
    }

    Ok(SynthScene { seed, config: cfg.clone(), annotation, map, clip_map, porch_distance, layout, palette, background })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::downsample_map;
    use crate::topology::{adjacency, h_connected_set};

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig::default();
        let a = gen_scene(5, &cfg).unwrap();
        let b = gen_scene(5, &cfg).unwrap();
        assert_eq!(a.annotation.to_json_string(), b.annotation.to_json_string());
        assert_eq!(a.background, b.background);
        assert_ne!(a.annotation.to_json_string(), gen_scene(6, &cfg).unwrap().annotation.to_json_string());
    }

    #[test]
    fn fifty_scenes_are_valid_and_connected() {
        let cfg = SynthConfig::default();
        let mut reaches = 0;
        let mut mirrored = 0;
        for seed in 0..50 {
            let s = gen_scene(seed, &cfg).unwrap();
            assert!(validate_annotation(&s.annotation).is_empty());
            let coarse = downsample_map(&s.map, 16, 9).unwrap();
            for p in PlaceCategory::ALL {
                assert!(s.clip_map.contains(p), "seed {seed}: {p} missing at clip resolution");
                assert!(coarse.contains(p), "seed {seed}: {p} missing at layer resolution");
            }
            let adj = adjacency(&s.map);
            let c1 = h_connected_set(&adj, PlaceCategory::Porch, 1).unwrap();
            assert!(c1.contains(PlaceCategory::Walkway));
            assert!(c1.contains(PlaceCategory::Driveway));
            assert_eq!(adj.adjacent(PlaceCategory::Driveway, PlaceCategory::Street), s.layout.driveway_reaches_street);
            reaches += s.layout.driveway_reaches_street as usize;
            mirrored += s.layout.mirrored as usize;
        }
        assert!(reaches > 10 && reaches < 40);
        assert!(mirrored > 10 && mirrored < 40);
    }
}
