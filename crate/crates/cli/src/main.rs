use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bellowsense::harness::{self, RunConfig, TrainMode};
use bellowsense::regression::AxesMask;
use bellowsense::Axis;
use clap::{Args, Parser, Subcommand};

/// Camera-based proprioception for an inflatable soft actuator.
#[derive(Parser, Debug)]
#[command(name = "bellowsense", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// key=value run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named base profile (`default` or `ci`); conflicts with a `profile` key
    /// in --config.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Extra config overrides, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a training and a test dataset.
    GenData {
        /// Training samples (overrides train.n).
        #[arg(long)]
        n: Option<usize>,
        /// Test samples (overrides test.n).
        #[arg(long)]
        test_n: Option<usize>,
    },
    /// Train the three axis regressors.
    Train {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Use the shipped default hyperparameters.
        #[arg(long, conflicts_with = "grid")]
        fixed_table1: bool,
        /// Select hyperparameters by cross-validated grid search.
        #[arg(long)]
        grid: bool,
    },
    /// Per-axis RMSE of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write per-sample residuals.
        #[arg(long)]
        residuals: bool,
    },
    /// Latency of feature extraction plus regression.
    Bench {
        #[arg(long)]
        model: PathBuf,
        /// Axes to evaluate, e.g. `xyz` or `z`.
        #[arg(long)]
        axes: Option<String>,
        /// Timed frames (at least 1000).
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Calibrate the simulated distance sensor and compare both phases.
    TofBaseline,
    /// Closed-loop staircase run.
    Simulate {
        /// Trained model for camera feedback.
        #[arg(long, required_unless_present = "perfect_sensing")]
        model: Option<PathBuf>,
        /// Feed back the true elongation instead of the camera estimate.
        #[arg(long, conflicts_with = "model")]
        perfect_sensing: bool,
    },
}

fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut text = String::new();
    if let Some(p) = &common.profile {
        text.push_str(&format!("profile={p}\n"));
    }
    if let Some(path) = &common.config {
        let body = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        text.push_str(&body);
        text.push('\n');
    }
    let mut cfg = RunConfig::from_text(&text)?;
    for kv in &common.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects key=value, got {kv:?}");
        };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn fmt_rmse(rmse: &[f64; 3]) -> String {
    Axis::ALL
        .iter()
        .zip(rmse)
        .map(|(a, r)| format!("{a}={r:.3} mm"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    let out: &Path = &cli.common.out;
    match cli.command {
        Command::GenData { n, test_n } => {
            if let Some(n) = n {
                cfg.train_n = n;
            }
            if let Some(n) = test_n {
                cfg.test_n = n;
            }
            let r = harness::cmd_gen_data(&cfg, out)?;
            println!("train: {} samples in {} sha256={}", r.train_n, r.train_dir.display(), r.train_hash);
            println!("test: {} samples in {} sha256={}", r.test_n, r.test_dir.display(), r.test_hash);
        }
        Command::Train { data, fixed_table1, grid } => {
            let mode = if grid {
                TrainMode::Grid
            } else if fixed_table1 {
                TrainMode::Table1
            } else {
                TrainMode::Fixed
            };
            let r = harness::cmd_train(&cfg, &data, out, mode)?;
            for (a, h) in Axis::ALL.iter().zip(&r.hyperparams) {
                println!("{a}: epsilon={} K={} gamma={}", h.epsilon, h.cost, h.gamma);
            }
            println!(
                "trained on {} samples in {:.2} s -> {}",
                r.samples,
                r.wall_time,
                r.model_path.display()
            );
        }
        Command::Eval { model, data, residuals } => {
            let r = harness::cmd_eval(&cfg, &model, &data, out, residuals)?;
            println!("RMSE over {} samples: {}", r.n, fmt_rmse(&r.rmse));
        }
        Command::Bench { model, axes, frames } => {
            if let Some(a) = axes {
                cfg.bench_axes = AxesMask::parse(&a)?;
            }
            if let Some(f) = frames {
                cfg.bench_frames = f;
            }
            let r = harness::cmd_bench(&cfg, &model, out)?;
            println!(
                "{}x{} axes={} frames={}: mean {:.2} ms, p95 {:.2} ms, p99 {:.2} ms, {:.1} Hz",
                r.width, r.height, r.axes, r.frames, r.mean_ms, r.p95_ms, r.p99_ms, r.hz
            );
        }
        Command::TofBaseline => {
            let r = harness::cmd_tof_baseline(&cfg, out)?;
            println!("calibration: z = {:.6} * raw + {:.6}", r.gain, r.offset);
            println!("{}: RMSE {:.3} mm", harness::UNDISTURBED, r.undisturbed_rmse);
            println!("{}: RMSE {:.3} mm", harness::DISTURBED, r.disturbed_rmse);
        }
        Command::Simulate { model, perfect_sensing } => {
            let model = if perfect_sensing { None } else { model };
            let r = harness::cmd_simulate(&cfg, model.as_deref(), out)?;
            println!("RMSE z_CM vs z_GT: {:.3} mm", r.sensing_rmse);
            println!("RMSE z_GT vs z_SP: {:.3} mm", r.tracking_rmse);
            let worst = r.step_errors.iter().cloned().fold(0.0, f64::max);
            println!("worst steady-state error: {worst:.3} mm");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
