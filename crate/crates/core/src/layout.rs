//! Scene layouts: place categories, annotations, segmentation maps and masks.
//!
//! A scene annotation is a list of polygons drawn over a camera frame, each
//! tagged with one of six place categories. Rasterizing it produces a
//! [`SegmentationMap`] at any resolution; per-place [`BitMask`]s are then
//! read off the map to decompose feature tensors.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};

/// Category id of cells that belong to no place.
pub const BACKGROUND: u8 = 0;

/// Number of non-background place categories.
pub const NUM_PLACES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceCategory {
    Street = 1,
    Sidewalk = 2,
    Lawn = 3,
    Porch = 4,
    Walkway = 5,
    Driveway = 6,
}

impl PlaceCategory {
    /// All six places in id order.
    pub const ALL: [PlaceCategory; NUM_PLACES] = [
        PlaceCategory::Street,
        PlaceCategory::Sidewalk,
        PlaceCategory::Lawn,
        PlaceCategory::Porch,
        PlaceCategory::Walkway,
        PlaceCategory::Driveway,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Zero-based position in [`PlaceCategory::ALL`].
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1..=6 => Some(Self::ALL[id as usize - 1]),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlaceCategory::Street => "street",
            PlaceCategory::Sidewalk => "sidewalk",
            PlaceCategory::Lawn => "lawn",
            PlaceCategory::Porch => "porch",
            PlaceCategory::Walkway => "walkway",
            PlaceCategory::Driveway => "driveway",
        }
    }
}

impl fmt::Display for PlaceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlaceCategory {
    type Err = LivrError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| LivrError::UnknownCategory(s.to_string()))
    }
}

/// One annotated polygon. The category is kept as the raw string so that
/// unknown names survive parsing and can be reported by
/// [`validate_annotation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub category: String,
    pub polygon: Vec<[f64; 2]>,
}

impl Region {
    pub fn new(category: PlaceCategory, polygon: Vec<[f64; 2]>) -> Self {
        Self { category: category.name().to_string(), polygon }
    }

    pub fn place(&self) -> Option<PlaceCategory> {
        self.category.parse().ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub regions: Vec<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub porch_line: Option<[[f64; 2]; 2]>,
}

impl SceneAnnotation {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }

    pub fn has_place(&self, p: PlaceCategory) -> bool {
        self.regions.iter().any(|r| r.place() == Some(p))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    grid: Vec<u8>,
}

#[derive(Deserialize)]
struct RawMap {
    width: usize,
    height: usize,
    grid: Vec<u8>,
}

impl<'de> Deserialize<'de> for SegmentationMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMap::deserialize(d)?;
        SegmentationMap::new(raw.width, raw.height, raw.grid).map_err(serde::de::Error::custom)
    }
}

impl SegmentationMap {
    pub fn new(width: usize, height: usize, grid: Vec<u8>) -> Result<Self> {
        if grid.len() != width * height {
            return Err(LivrError::InvalidDimensions(format!(
                "grid has {} cells, expected {width}x{height}",
                grid.len()
            )));
        }
        if let Some(bad) = grid.iter().find(|&&v| v as usize > NUM_PLACES) {
            return Err(LivrError::Format(format!("category id {bad} out of range 0..=6")));
        }
        Ok(Self { width, height, grid })
    }

    /// A map with every cell set to `id`.
    pub fn filled(width: usize, height: usize, id: u8) -> Result<Self> {
        Self::new(width, height, vec![id; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn grid(&self) -> &[u8] {
        &self.grid
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.grid[y * self.width + x]
    }

    pub fn count(&self, p: PlaceCategory) -> usize {
        self.grid.iter().filter(|&&v| v == p.id()).count()
    }

    pub fn contains(&self, p: PlaceCategory) -> bool {
        self.grid.iter().any(|&v| v == p.id())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(LivrError::InvalidDimensions(format!(
                "mask has {} bits, expected {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn full(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Row ranges of the source grid covered by each output cell when `n_in`
/// cells are reduced to `n_out`: blocks of `ceil(n_in / n_out)` cells, the
/// last one possibly short. Output cells past the end of the source reuse the
/// final source cell.
pub(crate) fn block_ranges(n_in: usize, n_out: usize) -> Vec<Range<usize>> {
    let block = n_in.div_ceil(n_out);
    (0..n_out)
        .map(|i| {
            let start = (i * block).min(n_in - 1);
            let end = ((i + 1) * block).min(n_in).max(start + 1);
            start..end
        })
        .collect()
}

fn check_output_dims(out_w: usize, out_h: usize) -> Result<()> {
    if out_w == 0 || out_h == 0 {
        return Err(LivrError::InvalidDimensions(format!(
            "output dimensions {out_w}x{out_h} must be non-zero"
        )));
    }
    Ok(())
}

/// Even-odd crossing test of the horizontal line through `py` against every
/// edge; returns the x coordinates of the crossings, sorted.
fn row_crossings(polygon: &[[f64; 2]], py: f64) -> Vec<f64> {
    let n = polygon.len();
    let mut xs = Vec::new();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = polygon[i];
        let [xj, yj] = polygon[j];
        if (yi > py) != (yj > py) {
            xs.push((xj - xi) * (py - yi) / (yj - yi) + xi);
        }
        j = i;
    }
    xs.sort_by(f64::total_cmp);
    xs
}

/// Paints each region in listed order onto an `out_w`×`out_h` grid. A cell
/// belongs to a region when its center, mapped into annotation pixel
/// coordinates, lies inside the polygon under the even-odd rule.
pub fn rasterize_scene(ann: &SceneAnnotation, out_w: usize, out_h: usize) -> Result<SegmentationMap> {
    check_output_dims(out_w, out_h)?;
    if ann.image_width == 0 || ann.image_height == 0 {
        return Err(LivrError::InvalidDimensions("annotation image size is zero".into()));
    }
    let sx = ann.image_width as f64 / out_w as f64;
    let sy = ann.image_height as f64 / out_h as f64;
    let mut grid = vec![BACKGROUND; out_w * out_h];
    for (ri, region) in ann.regions.iter().enumerate() {
        if region.polygon.len() < 3 {
            return Err(LivrError::DegeneratePolygon { region: ri, points: region.polygon.len() });
        }
        let place = region
            .place()
            .ok_or_else(|| LivrError::UnknownCategory(region.category.clone()))?;
        for y in 0..out_h {
            let py = (y as f64 + 0.5) * sy;
            let xs = row_crossings(&region.polygon, py);
            if xs.is_empty() {
                continue;
            }
            let row = &mut grid[y * out_w..(y + 1) * out_w];
            for (x, cell) in row.iter_mut().enumerate() {
                let px = (x as f64 + 0.5) * sx;
                let right = xs.len() - xs.partition_point(|&v| v <= px);
                if right % 2 == 1 {
                    *cell = place.id();
                }
            }
        }
    }
    SegmentationMap::new(out_w, out_h, grid)
}

/// Majority-vote downsampling over ceiling-sized blocks. Ties go to the
/// smallest category id; background only wins with a strict majority over
/// every place.
pub fn downsample_map(map: &SegmentationMap, out_w: usize, out_h: usize) -> Result<SegmentationMap> {
    check_output_dims(out_w, out_h)?;
    if out_w > map.width || out_h > map.height {
        return Err(LivrError::InvalidDimensions(format!(
            "cannot downsample {}x{} to larger {out_w}x{out_h}",
            map.width, map.height
        )));
    }
    let rows = block_ranges(map.height, out_h);
    let cols = block_ranges(map.width, out_w);
    let mut grid = Vec::with_capacity(out_w * out_h);
    for ry in &rows {
        for rx in &cols {
            let mut counts = [0usize; NUM_PLACES + 1];
            for y in ry.clone() {
                for x in rx.clone() {
                    counts[map.get(x, y) as usize] += 1;
                }
            }
            let mut best = BACKGROUND;
            let mut best_count = counts[0];
            let mut best_is_place = false;
            for id in 1..=NUM_PLACES {
                let c = counts[id];
                if c == 0 {
                    continue;
                }
                if c > best_count || (!best_is_place && c == best_count) {
                    best = id as u8;
                    best_count = c;
                    best_is_place = true;
                }
            }
            grid.push(best);
        }
    }
    SegmentationMap::new(out_w, out_h, grid)
}

pub fn place_mask(map: &SegmentationMap, p: PlaceCategory) -> BitMask {
    BitMask {
        width: map.width,
        height: map.height,
        bits: map.grid.iter().map(|&v| v == p.id()).collect(),
    }
}

pub fn background_mask(map: &SegmentationMap) -> BitMask {
    BitMask {
        width: map.width,
        height: map.height,
        bits: map.grid.iter().map(|&v| v == BACKGROUND).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    InvalidImageSize { width: u32, height: u32 },
    DegeneratePolygon { region: usize, points: usize },
    OutOfBounds { region: usize, vertex: usize, x: f64, y: f64 },
    UnknownCategory { region: usize, name: String },
    MissingAnchor,
    RedundantPorchLine,
    DegeneratePorchLine,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::InvalidImageSize { width, height } => {
                write!(f, "invalid image size {width}x{height}")
            }
            Diagnostic::DegeneratePolygon { region, points } => {
                write!(f, "degenerate polygon: region {region} has {points} points")
            }
            Diagnostic::OutOfBounds { region, vertex, x, y } => {
                write!(f, "out-of-bounds vertex {vertex} of region {region}: ({x}, {y})")
            }
            Diagnostic::UnknownCategory { region, name } => {
                write!(f, "unknown category `{name}` in region {region}")
            }
            Diagnostic::MissingAnchor => f.write_str("missing anchor: no porch region and no porch_line"),
            Diagnostic::RedundantPorchLine => f.write_str("porch_line given although a porch region exists"),
            Diagnostic::DegeneratePorchLine => f.write_str("porch_line endpoints coincide"),
        }
    }
}

pub fn validate_annotation(ann: &SceneAnnotation) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let (w, h) = (ann.image_width as f64, ann.image_height as f64);
    if ann.image_width == 0 || ann.image_height == 0 {
        out.push(Diagnostic::InvalidImageSize { width: ann.image_width, height: ann.image_height });
    }
    for (ri, region) in ann.regions.iter().enumerate() {
        if region.place().is_none() {
            out.push(Diagnostic::UnknownCategory { region: ri, name: region.category.clone() });
        }
        if region.polygon.len() < 3 {
            out.push(Diagnostic::DegeneratePolygon { region: ri, points: region.polygon.len() });
        }
        for (vi, &[x, y]) in region.polygon.iter().enumerate() {
            let inside = x.is_finite() && y.is_finite() && (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
            if !inside {
                out.push(Diagnostic::OutOfBounds { region: ri, vertex: vi, x, y });
            }
        }
    }
    let has_porch = ann.has_place(PlaceCategory::Porch);
    match (has_porch, ann.porch_line) {
        (false, None) => out.push(Diagnostic::MissingAnchor),
        (true, Some(_)) => out.push(Diagnostic::RedundantPorchLine),
        (false, Some([a, b])) if a == b => out.push(Diagnostic::DegeneratePorchLine),
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cat: PlaceCategory, x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::new(cat, vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    fn ann(regions: Vec<Region>, w: u32, h: u32) -> SceneAnnotation {
        SceneAnnotation {
            scene_id: "t".into(),
            image_width: w,
            image_height: h,
            regions,
            porch_line: Some([[0.0, 0.0], [1.0, 0.0]]),
        }
    }

    /// Classic crossing-number point-in-polygon test, one cell at a time.
    fn pnpoly(poly: &[[f64; 2]], px: f64, py: f64) -> bool {
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let [xi, yi] = poly[i];
            let [xj, yj] = poly[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    #[test]
    fn full_frame_street_covers_everything() {
        let a = ann(vec![square(PlaceCategory::Street, 0.0, 0.0, 10.0, 8.0)], 10, 8);
        let m = rasterize_scene(&a, 10, 8).unwrap();
        assert!(m.grid().iter().all(|&v| v == PlaceCategory::Street.id()));
    }

    #[test]
    fn no_regions_is_background() {
        let a = ann(vec![], 7, 5);
        let m = rasterize_scene(&a, 7, 5).unwrap();
        assert!(m.grid().iter().all(|&v| v == BACKGROUND));
    }

    #[test]
    fn overlap_later_region_wins_against_brute_force() {
        let lawn = square(PlaceCategory::Lawn, 1.0, 1.0, 6.0, 6.0);
        let walk = square(PlaceCategory::Walkway, 4.0, 3.0, 9.0, 8.5);
        let a = ann(vec![lawn.clone(), walk.clone()], 10, 10);
        let m = rasterize_scene(&a, 10, 10).unwrap();
        let mut overlap = 0;
        for y in 0..10 {
            for x in 0..10 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let in_l = pnpoly(&lawn.polygon, px, py);
                let in_w = pnpoly(&walk.polygon, px, py);
                let want = if in_w {
                    PlaceCategory::Walkway.id()
                } else if in_l {
                    PlaceCategory::Lawn.id()
                } else {
                    BACKGROUND
                };
                overlap += (in_l && in_w) as usize;
                assert_eq!(m.get(x, y), want, "cell ({x},{y})");
            }
        }
        assert!(overlap > 0);
    }

    #[test]
    fn self_intersecting_polygon_uses_even_odd() {
        // Bow-tie: the two lobes are inside, the crossing point region is not doubled.
        let bow = Region::new(PlaceCategory::Lawn, vec![[0.0, 0.0], [8.0, 8.0], [8.0, 0.0], [0.0, 8.0]]);
        let a = ann(vec![bow.clone()], 8, 8);
        let m = rasterize_scene(&a, 8, 8).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let inside = pnpoly(&bow.polygon, x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(m.get(x, y) == PlaceCategory::Lawn.id(), inside);
            }
        }
    }

    #[test]
    fn rasterize_scales_to_output_resolution() {
        let a = ann(vec![square(PlaceCategory::Porch, 0.0, 50.0, 100.0, 100.0)], 100, 100);
        let m = rasterize_scene(&a, 10, 10).unwrap();
        for y in 0..10 {
            let want = if y >= 5 { PlaceCategory::Porch.id() } else { BACKGROUND };
            assert!((0..10).all(|x| m.get(x, y) == want));
        }
    }

    #[test]
    fn rasterize_errors() {
        let a = ann(vec![], 4, 4);
        assert!(matches!(rasterize_scene(&a, 0, 4), Err(LivrError::InvalidDimensions(_))));
        let bad = ann(vec![Region::new(PlaceCategory::Lawn, vec![[0.0, 0.0], [1.0, 1.0]])], 4, 4);
        assert!(matches!(
            rasterize_scene(&bad, 4, 4),
            Err(LivrError::DegeneratePolygon { region: 0, points: 2 })
        ));
    }

    #[test]
    fn downsample_identity_and_uniform() {
        let grid: Vec<u8> = (0..20).map(|i| (i % 7) as u8).collect();
        let m = SegmentationMap::new(5, 4, grid).unwrap();
        assert_eq!(downsample_map(&m, 5, 4).unwrap(), m);
        let u = SegmentationMap::filled(4, 4, PlaceCategory::Walkway.id()).unwrap();
        let d = downsample_map(&u, 2, 2).unwrap();
        assert!(d.grid().iter().all(|&v| v == PlaceCategory::Walkway.id()));
    }

    #[test]
    fn downsample_majority_by_count() {
        // Top-left 2x2 block: three street cells and one sidewalk cell.
        let s = PlaceCategory::Street.id();
        let w = PlaceCategory::Sidewalk.id();
        #[rustfmt::skip]
        let grid = vec![
            s, s, w, w,
            s, w, w, w,
            0, 0, 3, 3,
            0, 3, 3, 0,
        ];
        let m = SegmentationMap::new(4, 4, grid).unwrap();
        let d = downsample_map(&m, 2, 2).unwrap();
        assert_eq!(d.grid(), &[s, w, BACKGROUND, 3]);
    }

    #[test]
    fn downsample_ties() {
        let grid = vec![2, 5, 5, 2];
        let d = downsample_map(&SegmentationMap::new(2, 2, grid).unwrap(), 1, 1).unwrap();
        assert_eq!(d.grid(), &[2]);
        let grid = vec![0, 0, 4, 4];
        let d = downsample_map(&SegmentationMap::new(2, 2, grid).unwrap(), 1, 1).unwrap();
        assert_eq!(d.grid(), &[4]);
        let grid = vec![0, 0, 0, 4];
        let d = downsample_map(&SegmentationMap::new(2, 2, grid).unwrap(), 1, 1).unwrap();
        assert_eq!(d.grid(), &[0]);
    }

    #[test]
    fn block_ranges_match_ceil_pooling() {
        let r = block_ranges(90, 23);
        assert_eq!(r[0], 0..4);
        assert_eq!(r[22], 88..90);
        let r = block_ranges(10, 6);
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|b| !b.is_empty()));
    }

    #[test]
    fn place_mask_counts() {
        let grid: Vec<u8> = (0..100u32).map(|i| ((i * 37 + 11) % 7) as u8).collect();
        let m = SegmentationMap::new(10, 10, grid.clone()).unwrap();
        for p in PlaceCategory::ALL {
            let scan = grid.iter().filter(|&&v| v == p.id()).count();
            assert_eq!(place_mask(&m, p).count_ones(), scan);
        }
        let street = SegmentationMap::filled(3, 3, 1).unwrap();
        assert_eq!(place_mask(&street, PlaceCategory::Street).count_ones(), 9);
        assert_eq!(place_mask(&street, PlaceCategory::Lawn).count_ones(), 0);
    }

    #[test]
    fn validation_diagnostics() {
        let mut a = ann(vec![square(PlaceCategory::Lawn, 0.0, 0.0, 4.0, 4.0)], 4, 4);
        assert!(validate_annotation(&a).is_empty());

        a.regions.push(Region::new(PlaceCategory::Street, vec![[0.0, 0.0], [1.0, 1.0]]));
        assert_eq!(validate_annotation(&a), vec![Diagnostic::DegeneratePolygon { region: 1, points: 2 }]);

        a.regions.pop();
        a.porch_line = None;
        assert_eq!(validate_annotation(&a), vec![Diagnostic::MissingAnchor]);

        a.regions.push(Region { category: "garden".into(), polygon: vec![[0.0, 0.0], [5.0, 0.0], [0.0, 1.0]] });
        let d = validate_annotation(&a);
        assert!(d.contains(&Diagnostic::UnknownCategory { region: 1, name: "garden".into() }));
        assert!(d.iter().any(|x| matches!(x, Diagnostic::OutOfBounds { region: 1, vertex: 1, .. })));
    }

    #[test]
    fn segmentation_json_roundtrip_and_validation() {
        let m = SegmentationMap::new(2, 1, vec![0, 6]).unwrap();
        let s = m.to_json_string();
        assert_eq!(s, r#"{"width":2,"height":1,"grid":[0,6]}"#);
        assert_eq!(SegmentationMap::from_json_str(&s).unwrap(), m);
        assert!(SegmentationMap::from_json_str(r#"{"width":2,"height":1,"grid":[0,7]}"#).is_err());
        assert!(SegmentationMap::from_json_str(r#"{"width":2,"height":2,"grid":[0,1]}"#).is_err());
    }

    #[test]
    fn annotation_json_schema() {
        let s = r#"{"scene_id":"a","image_width":4,"image_height":4,
            "regions":[{"category":"walkway","polygon":[[0,0],[4,0],[4,4]]}],
            "porch_line":[[0,1],[3,1]]}"#;
        let a = SceneAnnotation::from_json_str(s).unwrap();
        assert_eq!(a.regions[0].place(), Some(PlaceCategory::Walkway));
        let back = SceneAnnotation::from_json_str(&a.to_json_string()).unwrap();
        assert_eq!(back, a);
    }
}
