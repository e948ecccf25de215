use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod learn;
mod scene;

#[derive(Parser)]
#[command(name = "livr", version, about = "Layout-induced video representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scene annotation; prints diagnostics as JSON.
    Validate {
        annotation: PathBuf,
    },
    /// Rasterize an annotation into a segmentation map.
    Rasterize {
        annotation: PathBuf,
        /// Output width (defaults to the annotation's image width).
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance field and part map of one place.
    Dt(scene::DtArgs),
    /// Place adjacency, h-connected sets and the action-place gate.
    Topo {
        segmentation: PathBuf,
        #[arg(long, default_value_t = 1)]
        h: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Gen(learn::GenArgs),
    /// Train a model on the observed scenes of a dataset.
    Train(learn::TrainArgs),
    /// Evaluate a checkpoint.
    Eval(learn::EvalArgs),
    /// Train and evaluate one model per value of a configuration dimension.
    Ablate(learn::AblateArgs),
    /// Finite-difference gradient checks of every differentiable op.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        shapes: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { annotation } => scene::validate(&annotation),
        Command::Rasterize { annotation, width, height, out } => scene::rasterize(&annotation, width, height, out),
        Command::Dt(args) => scene::dt(args),
        Command::Topo { segmentation, h, out } => scene::topo(&segmentation, h, out),
        Command::Gen(args) => learn::gen(args),
        Command::Train(args) => learn::train(args),
        Command::Eval(args) => learn::eval(args),
        Command::Ablate(args) => learn::ablate(args),
        Command::Gradcheck { seed, shapes } => learn::gradcheck(seed, shapes),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(text: &str, out: Option<&std::path::Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}
