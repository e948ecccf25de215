//! Distance to the anchor place and distance-based place discretization.
//!
//! Distances are measured between cell centers in grid units. Place anchors
//! use an exact Euclidean distance transform (separable lower-envelope pass
//! over squared distances, so results are bit-identical to a brute-force
//! nearest-anchor scan). Line anchors measure the distance to a one-pixel-wide
//! stroke along the segment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};
use crate::layout::{block_ranges, BitMask, PlaceCategory, SegmentationMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSpec {
    Place(PlaceCategory),
    Line([f64; 2], [f64; 2]),
}

impl Default for AnchorSpec {
    fn default() -> Self {
        AnchorSpec::Place(PlaceCategory::Porch)
    }
}

impl fmt::Display for AnchorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnchorSpec::Place(p) => write!(f, "{p}"),
            AnchorSpec::Line(a, b) => write!(f, "line:{},{},{},{}", a[0], a[1], b[0], b[1]),
        }
    }
}

/// Parses `porch` (or any place name) and `line:x1,y1,x2,y2`.
impl FromStr for AnchorSpec {
    type Err = LivrError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("line:") {
            let v: Vec<f64> = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| LivrError::InvalidConfig(format!("bad line anchor `{s}`: {e}")))?;
            if v.len() != 4 {
                return Err(LivrError::InvalidConfig(format!("line anchor needs 4 numbers, got `{s}`")));
            }
            let anchor = AnchorSpec::Line([v[0], v[1]], [v[2], v[3]]);
            anchor.check()?;
            return Ok(anchor);
        }
        Ok(AnchorSpec::Place(s.parse()?))
    }
}

impl AnchorSpec {
    fn check(&self) -> Result<()> {
        if let AnchorSpec::Line(a, b) = self {
            if a == b {
                return Err(LivrError::InvalidConfig("line anchor endpoints coincide".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub dist: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.dist[y * self.width + x]
    }

    /// Block-min reduction using the same block partition as
    /// [`crate::layout::downsample_map`].
    pub fn downsample_min(&self, out_w: usize, out_h: usize) -> Result<DistanceField> {
        if out_w == 0 || out_h == 0 || out_w > self.width || out_h > self.height {
            return Err(LivrError::InvalidDimensions(format!(
                "cannot reduce {}x{} field to {out_w}x{out_h}",
                self.width, self.height
            )));
        }
        let rows = block_ranges(self.height, out_h);
        let cols = block_ranges(self.width, out_w);
        let mut dist = Vec::with_capacity(out_w * out_h);
        for ry in &rows {
            for rx in &cols {
                let mut m = f64::INFINITY;
                for y in ry.clone() {
                    for x in rx.clone() {
                        m = m.min(self.get(x, y));
                    }
                }
                dist.push(m);
            }
        }
        Ok(DistanceField { width: out_w, height: out_h, dist })
    }
}

/// Squared distance from every cell to the nearest `true` cell along one
/// axis, then the 1-D lower envelope of parabolas along the other.
fn exact_edt(width: usize, height: usize, seeds: &[bool]) -> Vec<f64> {
    // Column pass: squared vertical distance to the nearest seed in the column.
    let mut col = vec![f64::INFINITY; width * height];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if seeds[y * width + x] {
                last = Some(y);
            }
            if let Some(s) = last {
                let d = (y - s) as f64;
                col[y * width + x] = d * d;
            }
        }
        last = None;
        for y in (0..height).rev() {
            if seeds[y * width + x] {
                last = Some(y);
            }
            if let Some(s) = last {
                let d = (s - y) as f64;
                let i = y * width + x;
                col[i] = col[i].min(d * d);
            }
        }
    }

    // Row pass over finite entries only.
    let mut out = vec![0.0; width * height];
    let mut v: Vec<usize> = Vec::with_capacity(width);
    let mut z: Vec<f64> = Vec::with_capacity(width + 1);
    for y in 0..height {
        let f = &col[y * width..(y + 1) * width];
        v.clear();
        z.clear();
        for q in 0..width {
            if !f[q].is_finite() {
                continue;
            }
            let qf = q as f64;
            loop {
                match v.last() {
                    None => {
                        v.push(q);
                        z.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let pf = p as f64;
                        let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
                        if s <= *z.last().unwrap() {
                            v.pop();
                            z.pop();
                        } else {
                            v.push(q);
                            z.push(s);
                            break;
                        }
                    }
                }
            }
        }
        let mut j = 0;
        for q in 0..width {
            let qf = q as f64;
            while j + 1 < v.len() && z[j + 1] < qf {
                j += 1;
            }
            let p = v[j];
            let dx = q.abs_diff(p) as f64;
            out[y * width + q] = (dx * dx + f[p]).sqrt();
        }
    }
    out
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

/// Euclidean distance from every cell center to the anchor.
///
/// For a place anchor this is the distance to the nearest anchor cell center.
/// For a line anchor it is the distance to the segment minus half a pixel,
/// floored at zero, so cells whose center lies within 0.5 px of the segment
/// are exactly zero. Line coordinates are in this map's pixel units.
pub fn distance_transform(map: &SegmentationMap, anchor: &AnchorSpec) -> Result<DistanceField> {
    let (w, h) = (map.width(), map.height());
    let dist = match *anchor {
        AnchorSpec::Place(p) => {
            let seeds: Vec<bool> = map.grid().iter().map(|&v| v == p.id()).collect();
            if !seeds.iter().any(|&s| s) {
                return Err(LivrError::MissingAnchor);
            }
            exact_edt(w, h, &seeds)
        }
        AnchorSpec::Line(a, b) => {
            anchor.check()?;
            let mut d = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let c = [x as f64 + 0.5, y as f64 + 0.5];
                    d.push((point_segment_distance(c, a, b) - 0.5).max(0.0));
                }
            }
            d
        }
    };
    Ok(DistanceField { width: w, height: h, dist })
}

/// Distance field for a scene: the porch when present, otherwise the
/// annotated porch line (given in annotation pixels, rescaled to the map).
pub fn scene_anchor(
    map: &SegmentationMap,
    porch_line: Option<[[f64; 2]; 2]>,
    annotation_size: (u32, u32),
) -> Result<AnchorSpec> {
    if map.contains(PlaceCategory::Porch) {
        return Ok(AnchorSpec::Place(PlaceCategory::Porch));
    }
    let [a, b] = porch_line.ok_or(LivrError::MissingAnchor)?;
    let sx = map.width() as f64 / annotation_size.0 as f64;
    let sy = map.height() as f64 / annotation_size.1 as f64;
    Ok(AnchorSpec::Line([a[0] * sx, a[1] * sy], [b[0] * sx, b[1] * sy]))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartIndexMap {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    /// `-1` outside the place, otherwise the part index in `0..k`.
    pub part: Vec<i32>,
}

impl PartIndexMap {
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.part[y * self.width + x]
    }

    /// A map where no cell belongs to the place.
    pub fn empty(width: usize, height: usize, k: usize) -> Self {
        Self { width, height, k, part: vec![-1; width * height] }
    }
}

/// Splits place `p` into `k` equal-width distance bands between the place's
/// own nearest and farthest distances. Part 0 is nearest the anchor.
pub fn discretize_place(
    map: &SegmentationMap,
    field: &DistanceField,
    p: PlaceCategory,
    k: usize,
) -> Result<PartIndexMap> {
    if k == 0 {
        return Err(LivrError::InvalidConfig("k must be at least 1".into()));
    }
    if field.width != map.width() || field.height != map.height() {
        return Err(LivrError::ShapeMismatch(format!(
            "distance field {}x{} vs map {}x{}",
            field.width,
            field.height,
            map.width(),
            map.height()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&c, &d) in map.grid().iter().zip(&field.dist) {
        if c == p.id() {
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    if lo > hi {
        return Err(LivrError::EmptyPlace(p));
    }
    let range = hi - lo;
    let kf = k as f64;
    let part = map
        .grid()
        .iter()
        .zip(&field.dist)
        .map(|(&c, &d)| {
            if c != p.id() {
                -1
            } else if range == 0.0 {
                0
            } else {
                ((kf * (d - lo) / range).floor() as i32).min(k as i32 - 1)
            }
        })
        .collect();
    Ok(PartIndexMap { width: map.width(), height: map.height(), k, part })
}

pub fn part_mask(pim: &PartIndexMap, i: usize) -> Result<BitMask> {
    if i >= pim.k {
        return Err(LivrError::PartOutOfRange { index: i, k: pim.k });
    }
    BitMask::new(pim.width, pim.height, pim.part.iter().map(|&v| v == i as i32).collect())
}
