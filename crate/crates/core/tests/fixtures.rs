//! Golden rasterization fixtures shared with the annotation tool.

use std::fs;
use std::path::PathBuf;

use livr_core::layout::{rasterize_scene, validate_annotation, Diagnostic, SceneAnnotation, SegmentationMap};
use serde_json::Value;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/raster")
}

fn cases() -> Vec<Value> {
    let m: Value = serde_json::from_str(&fs::read_to_string(dir().join("manifest.json")).unwrap()).unwrap();
    m["cases"].as_array().unwrap().clone()
}

#[test]
fn rasterizer_matches_every_golden_map() {
    let cases = cases();
    assert!(cases.len() >= 8);
    for c in cases {
        let name = c["name"].as_str().unwrap();
        let ann = SceneAnnotation::load(dir().join(c["annotation"].as_str().unwrap())).unwrap();
        let golden = SegmentationMap::load(dir().join(c["segmentation"].as_str().unwrap())).unwrap();
        let (w, h) = (c["width"].as_u64().unwrap() as usize, c["height"].as_u64().unwrap() as usize);
        let got = rasterize_scene(&ann, w, h).unwrap();
        let diff = got.grid().iter().zip(golden.grid()).filter(|(a, b)| a != b).count();
        assert_eq!(diff, 0, "{name}: {diff} cells differ from the golden map");
    }
}

#[test]
fn validity_flags_match_diagnostics() {
    for c in cases() {
        let name = c["name"].as_str().unwrap();
        let ann = SceneAnnotation::load(dir().join(c["annotation"].as_str().unwrap())).unwrap();
        let diags = validate_annotation(&ann);
        if c["valid"].as_bool().unwrap() {
            assert!(diags.is_empty(), "{name}: {diags:?}");
        } else {
            assert_eq!(diags, vec![Diagnostic::MissingAnchor], "{name}");
        }
    }
}

#[test]
fn annotations_roundtrip_losslessly() {
    for c in cases() {
        let text = fs::read_to_string(dir().join(c["annotation"].as_str().unwrap())).unwrap();
        let ann = SceneAnnotation::from_json_str(&text).unwrap();
        let again = SceneAnnotation::from_json_str(&ann.to_json_string()).unwrap();
        assert_eq!(ann, again);
        assert_eq!(ann.to_json_string(), again.to_json_string(), "{}", c["name"]);
    }
}
