use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use saliency_core::pipeline::run_dataset;
use saliency_core::synthetic::mini_dataset;
use saliency_core::{PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "saliency", version, about = "Salient object detection via low-rank plus sparse decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute saliency maps for every image in a directory.
    Detect(DetectArgs),
    /// Write a synthetic image set with ground-truth masks.
    MakeDataset(MakeDatasetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Coarse,
    Refined,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Coarse => Stage::Coarse,
            StageArg::Refined => Stage::Refined,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Directory of input images (png, jpg, bmp).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for maps, metrics and the run log.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory of binary ground-truth masks matched by file stem.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// `key = value` configuration file. Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    stage: Option<StageArg>,
    /// Images processed in parallel.
    #[arg(long)]
    workers: Option<usize>,
    /// Write the per-iteration solver trace of each image.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct MakeDatasetArgs {
    /// Destination; `images/` and `gt/` are created inside it.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 12)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    width: u32,
    #[arg(long, default_value_t = 150)]
    height: u32,
}

fn detect_config(args: DetectArgs) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = args.input {
        config.input = Some(p);
    }
    if let Some(p) = args.output {
        config.output = Some(p);
    }
    if let Some(p) = args.gt {
        config.gt = Some(p);
    }
    if let Some(s) = args.stage {
        config.stage = s.into();
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    config.trace |= args.trace;
    config.validate()?;
    Ok(config)
}

fn detect(args: DetectArgs) -> ExitCode {
    let config = match detect_config(args) {
        Ok(c) => c,
        Err(e) => {
            error!("{e:#}");
            return ExitCode::from(1);
        }
    };
    let run = match run_dataset(&config) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(1);
        }
    };
    info!("{} succeeded, {} failed", run.succeeded(), run.failed());
    if let Some(report) = &run.report {
        println!(
            "images={} wf={:.4} or={:.4} auc={:.4} mae={:.4}",
            report.per_image.len(),
            report.wf,
            report.or_score,
            report.auc,
            report.mae
        );
    }
    if run.succeeded() == 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn make_dataset(args: MakeDatasetArgs) -> Result<()> {
    let images = args.output.join("images");
    let gt = args.output.join("gt");
    fs::create_dir_all(&images).with_context(|| format!("creating {}", images.display()))?;
    fs::create_dir_all(&gt).with_context(|| format!("creating {}", gt.display()))?;
    for scene in mini_dataset(args.count, args.seed, args.width, args.height) {
        let name = format!("{}.png", scene.name);
        scene.image.save(images.join(&name)).with_context(|| format!("writing {name}"))?;
        scene.mask.save(gt.join(&name)).with_context(|| format!("writing mask {name}"))?;
    }
    info!("wrote {} scenes to {}", args.count, args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Detect(args) => detect(args),
        Command::MakeDataset(args) => match make_dataset(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                error!("{e:#}");
                ExitCode::from(1)
            }
        },
    }
}
