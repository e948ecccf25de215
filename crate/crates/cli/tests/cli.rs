use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn livr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_livr")).args(args).output().expect("spawn livr")
}

fn ok(args: &[&str]) -> String {
    let out = livr(args);
    assert!(out.status.success(), "livr {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/raster")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_exit_code_follows_diagnostics() {
    let manifest = read_json(&fixtures().join("manifest.json"));
    for case in manifest["cases"].as_array().unwrap() {
        let out = livr(&["validate", &fixture(case["annotation"].as_str().unwrap())]);
        let valid = case["valid"].as_bool().unwrap();
        assert_eq!(out.status.code(), Some(if valid { 0 } else { 1 }), "{}", case["name"]);
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(doc["diagnostics"].as_array().unwrap().is_empty(), valid);
    }
}

#[test]
fn rasterize_reproduces_golden_maps() {
    let manifest = read_json(&fixtures().join("manifest.json"));
    for case in manifest["cases"].as_array().unwrap() {
        let (w, h) = (case["width"].to_string(), case["height"].to_string());
        let out = ok(&["rasterize", &fixture(case["annotation"].as_str().unwrap()), "--width", &w, "--height", &h]);
        let got: Value = serde_json::from_str(&out).unwrap();
        let want = read_json(&fixtures().join(case["segmentation"].as_str().unwrap()));
        assert_eq!(got["grid"], want["grid"], "{}", case["name"]);
        assert_eq!(got["width"], want["width"]);
    }
}

#[test]
fn missing_and_malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(livr(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(livr(&["topo", "/nonexistent/map.json"]).status.code(), Some(2));
    let seg = fixture("front_yard.segmentation.json");
    assert_eq!(livr(&["dt", &seg, "--k", "0"]).status.code(), Some(2));
    assert_eq!(livr(&["gradcheck", "--shapes", "0"]).status.code(), Some(2));
    assert!(!livr(&["frobnicate"]).status.success());
}

#[test]
fn dt_writes_distance_parts_and_previews() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("dt.json");
    let seg = fixture("front_yard.segmentation.json");
    ok(&["dt", &seg, "--k", "3", "--place", "walkway", "--out", out.to_str().unwrap(), "--pgm", dir.path().to_str().unwrap()]);
    let doc = read_json(&out);
    let map = read_json(&fixtures().join("front_yard.segmentation.json"));
    let grid = map["grid"].as_array().unwrap();
    let dist = doc["distance"]["dist"].as_array().unwrap();
    let parts = doc["parts"]["part"].as_array().unwrap();
    assert_eq!(dist.len(), grid.len());
    let (porch, walkway) = (4, 5);
    let mut seen = [false; 3];
    for i in 0..grid.len() {
        let id = grid[i].as_u64().unwrap();
        if id == porch {
            assert_eq!(dist[i].as_f64().unwrap(), 0.0);
        }
        let p = parts[i].as_i64().unwrap();
        assert_eq!(p >= 0, id == walkway);
        if p >= 0 {
            seen[p as usize] = true;
        }
    }
    assert_eq!(seen, [true; 3]);
    for name in ["distance.pgm", "parts.pgm"] {
        let bytes = fs::read(dir.path().join(name)).unwrap();
        assert!(bytes.starts_with(b"P5\n64 36\n255\n"));
        assert_eq!(bytes.len(), b"P5\n64 36\n255\n".len() + 64 * 36);
    }
}

#[test]
fn topo_reports_symmetric_adjacency_and_nested_sets() {
    let seg = fixture("front_yard.segmentation.json");
    let doc = |h: &str| -> Value { serde_json::from_str(&ok(&["topo", &seg, "--h", h])).unwrap() };
    let d0 = doc("0");
    let adj = d0["adjacency"].as_array().unwrap();
    for i in 0..6 {
        assert_eq!(adj[i][i], 0);
        for j in 0..6 {
            assert_eq!(adj[i][j], adj[j][i]);
        }
    }
    assert_eq!(d0["present"].as_array().unwrap().len(), 6);
    assert_eq!(d0["connected"]["porch"], serde_json::json!(["porch"]));
    let big = doc("5");
    for (p, set) in big["connected"].as_object().unwrap() {
        assert_eq!(set.as_array().unwrap().len(), 6, "{p}");
    }
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck", "--shapes", "1", "--seed", "3"]);
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 5);
    assert!(!out.contains("FAIL"));
}

#[test]
fn gen_train_eval_ablate_roundtrip() {
    let dir = TempDir::new().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    ok(&["gen", "--scenes", "3", "--clips-per-scene", "6", "--unseen", "1", "--frames", "4", "--seed", "4", "--out", &p("data")]);
    let manifest = read_json(&dir.path().join("data/manifest.json"));
    assert_eq!(manifest["clips"].as_array().unwrap().len(), 18);
    let scene = &manifest["scenes"][0];
    ok(&["validate", &p(&format!("data/{}", scene["annotation"].as_str().unwrap()))]);

    let config = r#"{"variant":"V3","L":2,"k":2,"h":1,"PL_DT":["walkway","driveway"],
        "frames":4,"height":36,"width":64,"filters":4}"#;
    fs::write(dir.path().join("model.json"), config).unwrap();
    let common = ["--config", &p("model.json"), "--data", &p("data"), "--epochs", "1", "--seed", "2"];

    let run = p("run");
    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--out", &run]);
    let summary: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(summary["epochs_run"], 1);
    let curves = fs::read_to_string(dir.path().join("run/curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 2);

    ok(&["eval", "--ckpt", &p("run"), "--data", &p("data"), "--on", "unseen", "--report", &p("report/unseen.json")]);
    let report = read_json(&dir.path().join("report/unseen.json"));
    let map = report["map"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&map));
    let csv = fs::read_to_string(dir.path().join("report/unseen.csv")).unwrap();
    assert!(csv.starts_with("action,positives,ap\n"));
    assert!(csv.trim_end().lines().last().unwrap().starts_with("mAP,,"));

    let abl = p("abl");
    let mut args = vec!["ablate"];
    args.extend(common);
    args.extend(["--dim", "k", "--values", "1,2", "--out", &abl]);
    ok(&args);
    let runs = read_json(&dir.path().join("abl/ablation.json"));
    let values: Vec<&str> = runs.as_array().unwrap().iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["1", "2"]);
    assert_eq!(fs::read_to_string(dir.path().join("abl/ablation.csv")).unwrap().lines().count(), 3);
}
