use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use livr_core::harness::{self, comparison_csv, evaluate, model_from_checkpoint, Dimension, SplitSpec, TrainConfig};
use livr_core::model::ModelConfig;
use livr_core::synth::{generate, Dataset, DatasetSpec, SynthConfig};
use livr_core::tensor::checkpoint::Checkpoint;
use livr_core::tensor::gradcheck::{run_suite, DEFAULT_EPS, TOLERANCE};
use serde_json::json;

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 18)]
    scenes: usize,
    #[arg(long, default_value_t = 40)]
    clips_per_scene: usize,
    /// Scenes held out as unseen (default: a third).
    #[arg(long)]
    unseen: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 36)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn gen(a: GenArgs) -> Result<bool> {
    let spec = DatasetSpec {
        scenes: a.scenes,
        clips_per_scene: a.clips_per_scene,
        unseen: a.unseen.unwrap_or(a.scenes / 3),
        seed: a.seed,
        synth: SynthConfig { width: a.width, height: a.height, frames: a.frames, ..SynthConfig::default() },
    };
    let (data, scenes, split, stats) = generate(&spec)?;
    data.write(&a.out, &scenes, &split)?;
    let missing = split.unbalanced_actions(&data.manifest);
    for &m in &missing {
        eprintln!("warning: {} lacks positives in the observed or the unseen scenes", data.manifest.actions[m]);
    }
    println!("{}", serde_json::to_string_pretty(&json!({ "out": a.out, "stats": stats, "split": split }))?);
    Ok(true)
}

#[derive(Args)]
pub struct TrainOpts {
    /// Model configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Split JSON (defaults to DATA/split.json).
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainOpts {
    fn load(&self) -> Result<(TrainConfig, Dataset, SplitSpec)> {
        let text = fs::read_to_string(&self.config).with_context(|| format!("reading {}", self.config.display()))?;
        let model = ModelConfig::from_json_str(&text)?;
        let mut cfg = TrainConfig::new(model);
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg.patience = self.patience;
        cfg.adam.lr = self.lr;
        cfg.seed = self.seed;
        cfg.validate()?;
        let data = Dataset::load(&self.data).with_context(|| format!("loading {}", self.data.display()))?;
        let split = load_split(&self.data, self.split.as_deref())?;
        Ok((cfg, data, split))
    }
}

fn load_split(data: &Path, split: Option<&Path>) -> Result<SplitSpec> {
    let path = split.map(Path::to_path_buf).unwrap_or_else(|| data.join("split.json"));
    SplitSpec::load(&path).with_context(|| format!("reading {}", path.display()))
}

fn curves_csv(curves: &[harness::EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_map\n");
    for r in curves {
        s.push_str(&format!("{},{:.6},{:.6}\n", r.epoch, r.train_loss, r.val_map));
    }
    s
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    opts: TrainOpts,
    /// Output directory for `checkpoint.json` and `curves.csv`.
    #[arg(long)]
    out: PathBuf,
}

pub fn train(a: TrainArgs) -> Result<bool> {
    let (cfg, data, split) = a.opts.load()?;
    let out = harness::train(&cfg, &data, &split, |r| {
        eprintln!("epoch {:>3}  loss {:.4}  val mAP {:.4}", r.epoch, r.train_loss, r.val_map)
    })?;
    fs::create_dir_all(&a.out)?;
    out.checkpoint(&cfg)?.save(a.out.join("checkpoint.json"))?;
    fs::write(a.out.join("curves.csv"), curves_csv(&out.curves))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "checkpoint": a.out.join("checkpoint.json"),
            "best_epoch": out.best_epoch,
            "best_val_map": out.best_val_map,
            "epochs_run": out.curves.len(),
        }))?
    );
    Ok(true)
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Subset {
    Unseen,
    Val,
    Train,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Checkpoint file, or a directory holding `checkpoint.json`.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "unseen")]
    on: Subset,
    /// Report JSON; a CSV table is written next to it.
    #[arg(long)]
    report: PathBuf,
}

pub fn eval(a: EvalArgs) -> Result<bool> {
    let path = if a.ckpt.is_dir() { a.ckpt.join("checkpoint.json") } else { a.ckpt.clone() };
    let ck = Checkpoint::load(&path).with_context(|| format!("reading {}", path.display()))?;
    let data = Dataset::load(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let split = load_split(&a.data, a.split.as_deref())?;
    let part = split.partition(&data.manifest)?;
    let model = model_from_checkpoint(&ck, data.manifest.actions.len())?;
    let (name, clips) = match a.on {
        Subset::Unseen => ("unseen", &part.unseen),
        Subset::Val => ("val", &part.val),
        Subset::Train => ("train", &part.train),
    };
    let report = evaluate(&format!("{} {name}", model.config.variant), &model, &data, clips)?;
    if let Some(dir) = a.report.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.report, serde_json::to_string_pretty(&report)?)?;
    fs::write(a.report.with_extension("csv"), report.to_csv())?;
    for e in &report.excluded {
        eprintln!("excluded (no positives): {e}");
    }
    println!("{} mAP {:.2} over {} clips", report.name, 100.0 * report.map, report.clips);
    Ok(true)
}

#[derive(Args)]
pub struct AblateArgs {
    #[command(flatten)]
    opts: TrainOpts,
    /// One of L, k, h, PL_DT, agg.
    #[arg(long)]
    dim: Dimension,
    /// Comma-separated values, e.g. `0,1,2`, `walkway+driveway,none` or `fc-1layer,topo@1`.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Output directory for `ablation.json` and `ablation.csv`.
    #[arg(long)]
    out: PathBuf,
}

pub fn ablate(a: AblateArgs) -> Result<bool> {
    let (cfg, data, split) = a.opts.load()?;
    let runs = harness::ablate(a.dim, &a.values, &cfg, &data, &split, |v, r| {
        eprintln!("{}={v}  epoch {:>3}  loss {:.4}  val mAP {:.4}", a.dim, r.epoch, r.train_loss, r.val_map)
    })?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("ablation.json"), serde_json::to_string_pretty(&runs)?)?;
    let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
    fs::write(a.out.join("ablation.csv"), comparison_csv(&reports))?;
    for r in &runs {
        println!("{}={}  unseen mAP {:.2}  (best val {:.2} at epoch {})", a.dim, r.value, 100.0 * r.report.map, 100.0 * r.best_val_map, r.best_epoch);
    }
    Ok(true)
}

pub fn gradcheck(seed: u64, shapes: usize) -> Result<bool> {
    if shapes == 0 {
        bail!("--shapes must be at least 1");
    }
    let results = run_suite(seed, shapes, DEFAULT_EPS);
    let mut ok = true;
    for r in &results {
        let pass = r.passed();
        ok &= pass;
        println!(
            "{} {:<18} {:<14} wrt {:<7} max rel err {:.3e}",
            if pass { "PASS" } else { "FAIL" },
            r.op,
            r.shape,
            r.wrt,
            r.max_rel_error
        );
    }
    println!("{} checks, tolerance {TOLERANCE:e}: {}", results.len(), if ok { "all passed" } else { "FAILED" });
    Ok(ok)
}
