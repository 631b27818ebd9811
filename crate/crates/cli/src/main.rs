use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use terrec::app::{self, EvalSource, RunConfig};
use terrec::eval::{ablation_csv, summary_csv_row, ABLATION_CSV_HEADER};
use terrec::io::write_atomic;

#[derive(Parser)]
#[command(name = "terrec", version, about = "Sparse 4D terrain reconstruction toolkit")]
#[command(after_long_help = app::keys_help())]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shorthand for --set preset=<NAME> (full | desk)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override one configuration key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic trajectory files
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Number of trajectory files
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Train a model; checkpoints and loss.csv go to --out
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from this checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Write reconstructed clouds for every trajectory
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f32>,
    },
    /// Per-frame metrics CSV plus a summary on stdout
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// gt | measurement | elevation | checkpoint | estimates
        #[arg(long, default_value = "checkpoint")]
        source: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory written by `infer`
        #[arg(long)]
        estimates: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sparsity ablation: metrics per measurement removal rate
    Ablate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated removal fractions
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        rates: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time kernel-map construction, a convolution and a forward pass
    Bench {
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
}

fn config(common: &Common, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut overrides = Vec::new();
    if let Some(p) = &common.preset {
        overrides.push(format!("preset={p}"));
    }
    overrides.extend(common.set.iter().cloned());
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    for (k, v) in extra {
        if let Some(v) = v {
            overrides.push(format!("{k}={v}"));
        }
    }
    Ok(RunConfig::load(common.config.as_deref(), &overrides)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match cli.cmd {
        Cmd::GenData { out, trajectories } => {
            let cfg = config(c, &[("trajectories", trajectories.map(|v| v.to_string()))])?;
            let s = app::gen_data(&cfg, &out)?;
            let vis = s.mean_visibility.map_or("n/a".into(), |v| format!("{:.1}%", 100.0 * v));
            println!("wrote {} trajectories, {} steps, mean visibility {vis}", s.files.len(), s.steps);
        }
        Cmd::Train { data, out, epochs, resume } => {
            let cfg = config(c, &[("epochs", epochs.map(|v| v.to_string()))])?;
            let s = app::train(&cfg, &data, &out, resume.as_deref())?;
            match s.last {
                Some(l) => println!(
                    "trained {} epochs ({} optimizer steps), last loss {:.4}; checkpoint {}",
                    s.epochs_run,
                    s.optimizer_steps,
                    l.total,
                    s.checkpoint.display()
                ),
                None => println!("no training steps run"),
            }
        }
        Cmd::Infer { checkpoint, data, out, alpha } => {
            let cfg = config(c, &[("alpha", alpha.map(|v| v.to_string()))])?;
            let files = app::infer(&checkpoint, &data, cfg.alpha, &out)?;
            println!("wrote {} estimate files to {}", files.len(), out.display());
        }
        Cmd::Eval { data, source, checkpoint, estimates, alpha, out } => {
            let cfg = config(c, &[("alpha", alpha.map(|v| v.to_string()))])?;
            let src = match source.as_str() {
                "gt" => EvalSource::GroundTruth,
                "measurement" => EvalSource::Measurement,
                "elevation" => EvalSource::Elevation,
                "checkpoint" => EvalSource::Checkpoint(checkpoint.context("--checkpoint is required")?),
                "estimates" => EvalSource::Estimates(estimates.context("--estimates is required")?),
                s => bail!("unknown source `{s}`"),
            };
            let r = app::evaluate(&src, &data, &cfg)?;
            write(&out, &r.csv())?;
            println!("{}", ABLATION_CSV_HEADER.replacen("rate", "source", 1));
            println!("{}", summary_csv_row(&source, &r.summary));
            if r.summary.empty_frames > 0 {
                log::warn!("{} frames had an empty prediction (precision reported as 0)", r.summary.empty_frames);
            }
        }
        Cmd::Ablate { checkpoint, data, rates, out } => {
            let cfg = config(c, &[])?;
            let rows = app::ablate(&checkpoint, &data, &rates, &cfg)?;
            let csv = ablation_csv(&rows);
            write(&out, &csv)?;
            print!("{csv}");
        }
        Cmd::Bench { reps } => {
            let cfg = config(c, &[])?;
            println!("op,mean_ms,detail");
            for r in app::bench(&cfg, reps)? {
                println!("{},{:.3},{}", r.name, r.mean_ms, r.detail);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
