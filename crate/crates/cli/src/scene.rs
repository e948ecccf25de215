use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use livr_core::geometry::{discretize_place, distance_transform, AnchorSpec, DistanceField, PartIndexMap};
use livr_core::layout::{rasterize_scene, validate_annotation, PlaceCategory, SceneAnnotation, SegmentationMap};
use livr_core::topology::{action_place_matrix, adjacency, h_connected_set, ActionCatalog};
use serde_json::{json, Value};

use crate::emit;

pub fn validate(path: &Path) -> Result<bool> {
    let ann = SceneAnnotation::load(path).with_context(|| format!("reading {}", path.display()))?;
    let diags = validate_annotation(&ann);
    for d in &diags {
        eprintln!("{}: {d}", path.display());
    }
    println!("{}", serde_json::to_string_pretty(&json!({ "scene_id": ann.scene_id, "diagnostics": diags }))?);
    Ok(diags.is_empty())
}

pub fn rasterize(path: &Path, width: Option<usize>, height: Option<usize>, out: Option<PathBuf>) -> Result<bool> {
    let ann = SceneAnnotation::load(path).with_context(|| format!("reading {}", path.display()))?;
    let w = width.unwrap_or(ann.image_width as usize);
    let h = height.unwrap_or(ann.image_height as usize);
    let map = rasterize_scene(&ann, w, h)?;
    emit(&map.to_json_string(), out.as_deref())?;
    Ok(true)
}

#[derive(Args)]
pub struct DtArgs {
    segmentation: PathBuf,
    /// `porch` (or another place) or `line:x1,y1,x2,y2` in map cells.
    #[arg(long, default_value = "porch")]
    anchor: AnchorSpec,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Place to split into distance parts.
    #[arg(long, default_value = "walkway")]
    place: PlaceCategory,
    /// JSON output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for `distance.pgm` and `parts.pgm` previews.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

pub fn dt(args: DtArgs) -> Result<bool> {
    let map = SegmentationMap::load(&args.segmentation)
        .with_context(|| format!("reading {}", args.segmentation.display()))?;
    let field = distance_transform(&map, &args.anchor)?;
    let parts = discretize_place(&map, &field, args.place, args.k)?;
    let doc = json!({
        "anchor": args.anchor.to_string(),
        "place": args.place,
        "k": args.k,
        "distance": field,
        "parts": parts,
    });
    emit(&serde_json::to_string(&doc)?, args.out.as_deref())?;
    if let Some(dir) = &args.pgm {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("distance.pgm"), distance_pgm(&field))?;
        fs::write(dir.join("parts.pgm"), parts_pgm(&parts))?;
    }
    Ok(true)
}

fn pgm(width: usize, height: usize, pixels: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels);
    out
}

/// Distances scaled so the farthest finite cell is white.
fn distance_pgm(f: &DistanceField) -> Vec<u8> {
    let max = f.dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max).max(1e-9);
    pgm(f.width, f.height, f.dist.iter().map(|&d| if d.is_finite() { (255.0 * d / max).round() as u8 } else { 255 }))
}

/// Black outside the place, then evenly spaced grays from part 0 to `k−1`.
fn parts_pgm(p: &PartIndexMap) -> Vec<u8> {
    let step = 200 / p.k.max(1);
    pgm(p.width, p.height, p.part.iter().map(|&v| if v < 0 { 0 } else { (55 + step * v as usize) as u8 }))
}

pub fn topo(path: &Path, h: usize, out: Option<PathBuf>) -> Result<bool> {
    let map = SegmentationMap::load(path).with_context(|| format!("reading {}", path.display()))?;
    let adj = adjacency(&map);
    let present: Vec<PlaceCategory> = PlaceCategory::ALL.into_iter().filter(|&p| adj.is_present(p)).collect();
    let matrix: Vec<Vec<u8>> = PlaceCategory::ALL
        .iter()
        .map(|&p| PlaceCategory::ALL.iter().map(|&q| (p != q && adj.adjacent(p, q)) as u8).collect())
        .collect();
    let mut sets = serde_json::Map::new();
    for &p in &present {
        let set: Vec<PlaceCategory> = h_connected_set(&adj, p, h)?.iter().collect();
        sets.insert(p.name().to_string(), json!(set));
    }
    let catalog = ActionCatalog::standard();
    let gate = action_place_matrix(&adj, &catalog, h);
    let rows: Vec<Value> = catalog
        .names()
        .into_iter()
        .zip(&gate.rows)
        .map(|(name, row)| json!({ "action": name, "places": row.iter().map(|&b| b as u8).collect::<Vec<_>>() }))
        .collect();
    let doc = json!({
        "places": PlaceCategory::ALL,
        "present": present,
        "adjacency": matrix,
        "h": h,
        "connected": sets,
        "gate": rows,
        "missing_actions": gate.missing.iter().map(|&i| catalog.names()[i].clone()).collect::<Vec<_>>(),
    });
    emit(&serde_json::to_string_pretty(&doc)?, out.as_deref())?;
    Ok(true)
}
