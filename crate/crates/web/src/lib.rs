//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes the scene annotation as JSON text and returns JSON
//! text, so the page needs no generated type glue beyond strings. The plain
//! Rust functions are what the native tests exercise; the `wasm_bindgen`
//! wrappers only turn errors into JavaScript exceptions.

use livr_core::geometry::{discretize_place, distance_transform, scene_anchor, AnchorSpec};
use livr_core::layout::{rasterize_scene, validate_annotation, PlaceCategory, SceneAnnotation, SegmentationMap};
use livr_core::synth::{gen_scene, SynthConfig};
use livr_core::topology::{action_place_matrix, adjacency, h_connected_set, ActionCatalog};
use serde_json::json;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn parse(annotation: &str) -> Result<SceneAnnotation> {
    SceneAnnotation::from_json_str(annotation).map_err(|e| e.to_string())
}

fn raster(annotation: &str, width: usize, height: usize) -> Result<(SceneAnnotation, SegmentationMap)> {
    let ann = parse(annotation)?;
    let map = rasterize_scene(&ann, width, height).map_err(|e| e.to_string())?;
    Ok((ann, map))
}

/// Annotation of a generated front-yard scene.
pub fn sample_annotation(seed: u64) -> Result<String> {
    let scene = gen_scene(seed, &SynthConfig::default()).map_err(|e| e.to_string())?;
    Ok(scene.annotation.to_json_string())
}

/// `{ "diagnostics": [...] }` for an annotation.
pub fn check(annotation: &str) -> Result<String> {
    let ann = parse(annotation)?;
    Ok(json!({ "diagnostics": validate_annotation(&ann) }).to_string())
}

/// Segmentation map at `width × height`.
pub fn segment(annotation: &str, width: usize, height: usize) -> Result<String> {
    Ok(raster(annotation, width, height)?.1.to_json_string())
}

/// Distance to the anchor and the `k`-part map of `place`. An empty anchor
/// uses the porch, or the annotated porch line when there is no porch.
pub fn distance_parts(annotation: &str, width: usize, height: usize, anchor: &str, place: &str, k: usize) -> Result<String> {
    let (ann, map) = raster(annotation, width, height)?;
    let anchor: AnchorSpec = if anchor.trim().is_empty() {
        scene_anchor(&map, ann.porch_line, (ann.image_width, ann.image_height)).map_err(|e| e.to_string())?
    } else {
        anchor.parse().map_err(|e: livr_core::LivrError| e.to_string())?
    };
    let place: PlaceCategory = place.parse().map_err(|e: livr_core::LivrError| e.to_string())?;
    let field = distance_transform(&map, &anchor).map_err(|e| e.to_string())?;
    let parts = discretize_place(&map, &field, place, k).map_err(|e| e.to_string())?;
    let max = field.dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
    Ok(json!({
        "width": width,
        "height": height,
        "anchor": anchor.to_string(),
        "max": max,
        "distance": field.dist,
        "parts": parts.part,
        "k": k,
    })
    .to_string())
}

/// Adjacency matrix, `C_h` of every present place and the action gate.
pub fn topology(annotation: &str, width: usize, height: usize, h: usize) -> Result<String> {
    let (_, map) = raster(annotation, width, height)?;
    let adj = adjacency(&map);
    let names: Vec<&str> = PlaceCategory::ALL.iter().map(|p| p.name()).collect();
    let matrix: Vec<Vec<bool>> =
        PlaceCategory::ALL.iter().map(|&p| PlaceCategory::ALL.iter().map(|&q| p != q && adj.adjacent(p, q)).collect()).collect();
    let mut connected = serde_json::Map::new();
    for p in PlaceCategory::ALL {
        if let Ok(set) = h_connected_set(&adj, p, h) {
            connected.insert(p.name().into(), json!(set.iter().map(|q| q.name()).collect::<Vec<_>>()));
        }
    }
    let catalog = ActionCatalog::standard();
    let gate = action_place_matrix(&adj, &catalog, h);
    Ok(json!({
        "places": names,
        "adjacency": matrix,
        "h": h,
        "connected": connected,
        "actions": catalog.names(),
        "gate": gate.rows,
    })
    .to_string())
}

#[wasm_bindgen(js_name = sampleAnnotation)]
pub fn js_sample_annotation(seed: u32) -> std::result::Result<String, JsError> {
    sample_annotation(seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = validate)]
pub fn js_validate(annotation: &str) -> std::result::Result<String, JsError> {
    check(annotation).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = segment)]
pub fn js_segment(annotation: &str, width: usize, height: usize) -> std::result::Result<String, JsError> {
    segment(annotation, width, height).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = distanceParts)]
pub fn js_distance_parts(
    annotation: &str,
    width: usize,
    height: usize,
    anchor: &str,
    place: &str,
    k: usize,
) -> std::result::Result<String, JsError> {
    distance_parts(annotation, width, height, anchor, place, k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = topology)]
pub fn js_topology(annotation: &str, width: usize, height: usize, h: usize) -> std::result::Result<String, JsError> {
    topology(annotation, width, height, h).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn scene() -> String {
        sample_annotation(3).unwrap()
    }

    #[test]
    fn sample_scene_validates() {
        let v: Value = serde_json::from_str(&check(&scene()).unwrap()).unwrap();
        assert_eq!(v["diagnostics"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn distance_is_zero_on_the_porch_and_parts_cover_the_place() {
        let ann = scene();
        let seg: Value = serde_json::from_str(&segment(&ann, 64, 36).unwrap()).unwrap();
        let grid: Vec<u64> = seg["grid"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        let v: Value = serde_json::from_str(&distance_parts(&ann, 64, 36, "", "walkway", 3).unwrap()).unwrap();
        let dist = v["distance"].as_array().unwrap();
        let parts = v["parts"].as_array().unwrap();
        assert_eq!(dist.len(), 64 * 36);
        for (i, &id) in grid.iter().enumerate() {
            if id == PlaceCategory::Porch.id() as u64 {
                assert_eq!(dist[i].as_f64().unwrap(), 0.0);
            }
            let part = parts[i].as_i64().unwrap();
            assert_eq!(part >= 0, id == PlaceCategory::Walkway.id() as u64);
            assert!(part < 3);
        }
    }

    #[test]
    fn topology_gate_grows_with_h() {
        let ann = scene();
        let sum = |h: usize| {
            let v: Value = serde_json::from_str(&topology(&ann, 64, 36, h).unwrap()).unwrap();
            v["gate"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap().clone()).filter(|b| b.as_bool().unwrap()).count()
        };
        let (s0, s1, s3) = (sum(0), sum(1), sum(3));
        assert_eq!(s0, 15);
        assert!(s0 < s1 && s1 <= s3);
        assert_eq!(s3, 15 * 6);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(segment("{", 8, 8).is_err());
        assert!(distance_parts(&scene(), 64, 36, "", "garden", 3).is_err());
        assert!(distance_parts(&scene(), 64, 36, "line:0,0,0,0", "lawn", 3).is_err());
    }
}
