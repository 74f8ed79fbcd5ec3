//! `neupoints`: dataset generation, training, upsampling and evaluation.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Parser, Subcommand};
use neural_points::geometry::io::{read_cloud, read_obj, write_cloud};
use neural_points::metrics::evaluate;
use neural_points::sampler::upsample;
use neural_points::trainer::{gen_dataset, train};
use neural_points::{Checkpoint, DatasetConfig, Surface, Target, TrainConfig, UpsampleRequest};

#[derive(Parser)]
#[command(name = "neupoints", version, about = "Point clouds as integrated local neural fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample synthetic surfaces into an input/ground-truth dataset.
    GenData {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Resample a point cloud with a trained checkpoint.
    #[command(group(ArgGroup::new("target").required(true).args(["factor", "count"])))]
    Upsample {
        #[arg(long)]
        input: PathBuf,
        /// Output size as a multiple of the input size; need not be an integer.
        #[arg(long)]
        factor: Option<f64>,
        /// Exact output size.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Number of patches for clouds larger than one patch.
        #[arg(long)]
        anchors: Option<usize>,
        /// Samples drawn from every local chart.
        #[arg(long)]
        samples_per_patch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Chamfer, Hausdorff and point-to-surface distances as one JSON line.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Reference surface: `sphere`, `torus:major=0.7,minor=0.3`, ... or an `.obj` mesh.
        #[arg(long)]
        surface: Option<String>,
        /// Appends the metrics to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData { config } => {
            let cfg = DatasetConfig::load(&config)?;
            let manifest = gen_dataset(&cfg)?;
            println!("{} samples written to {}", manifest.entries.len(), cfg.output_dir.display());
        }
        Command::Train { config } => {
            let cfg = TrainConfig::load(&config)?;
            let out = train(&cfg)?;
            println!(
                "{} iterations in {:.1}s, checkpoint {}",
                out.checkpoint.iteration,
                out.seconds,
                out.checkpoint_path.display()
            );
        }
        Command::Upsample {
            input,
            factor,
            count,
            checkpoint,
            output,
            anchors,
            samples_per_patch,
            seed,
        } => {
            let cloud = read_cloud(&input).with_context(|| format!("reading {}", input.display()))?;
            let ckpt = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let target = match (factor, count) {
                (Some(f), None) => Target::Factor(f),
                (None, Some(j)) => Target::Count(j),
                _ => unreachable!("clap enforces exactly one target"),
            };
            let mut req = UpsampleRequest::new(cloud, target);
            req.anchors = anchors;
            req.samples_per_patch = samples_per_patch;
            req.seed = seed;
            let out = upsample(&req, &ckpt.model)?;
            write_cloud(&output, &out.cloud).with_context(|| format!("writing {}", output.display()))?;
            println!("{} points written to {}", out.cloud.len(), output.display());
        }
        Command::Eval { pred, gt, surface, csv } => {
            let p = read_cloud(&pred).with_context(|| format!("reading {}", pred.display()))?;
            let g = read_cloud(&gt).with_context(|| format!("reading {}", gt.display()))?;
            let surface = surface.as_deref().map(parse_surface).transpose()?;
            let report = evaluate(p.positions(), g.positions(), surface.as_ref())?;
            println!(
                "{}",
                serde_json::json!({"cd": report.cd, "hd": report.hd, "p2f": report.p2f})
            );
            if let Some(path) = csv {
                append_csv(&path, &pred, &gt, report.cd, report.hd, report.p2f)?;
            }
        }
    }
    Ok(())
}

fn parse_surface(spec: &str) -> Result<Surface> {
    if spec.to_ascii_lowercase().ends_with(".obj") {
        let mesh = read_obj(Path::new(spec)).with_context(|| format!("reading {spec}"))?;
        return Ok(Surface::Mesh(mesh));
    }
    Ok(Surface::parse(spec)?)
}

fn append_csv(path: &Path, pred: &Path, gt: &Path, cd: f64, hd: f64, p2f: Option<f64>) -> Result<()> {
    let fresh = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(["pred", "gt", "cd", "hd", "p2f"])?;
    }
    w.write_record([
        pred.display().to_string(),
        gt.display().to_string(),
        cd.to_string(),
        hd.to_string(),
        p2f.map(|v| v.to_string()).unwrap_or_default(),
    ])?;
    w.flush()?;
    Ok(())
}
