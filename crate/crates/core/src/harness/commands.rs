use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::RunConfig;
use crate::control::{run_closed_loop, Feedback, Setpoints, TrajectoryLog};
use crate::datastore::{dataset_hash, load_dataset, load_model, save_dataset, save_model, Dataset};
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::imaging::GrayImage;
use crate::plantsim::{
    calibrate_linear, frame_seed, generate_dataset, noise, render_frame, render_sample, sample_poses,
    simulate_tof,
    step_plant, Disturbance, PatternSpec, PlantConfig, PlantState,
};
use crate::pose::{Axis, Pose};
use crate::regression::{
    cross_validate, train_pose_model, AxesMask, CvReport, PoseModel, PoseTraining, SvrHyperparams,
    TrainStats, DEFAULT_HYPERPARAMS,
};

pub const TRAIN_DIR: &str = "train";
pub const TEST_DIR: &str = "test";
pub const MODEL_FILE: &str = "model.txt";
pub const CV_REPORT_FILE: &str = "cv_report.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const BENCH_FILE: &str = "bench.csv";
pub const TOF_FILE: &str = "tof_baseline.csv";
pub const TOF_TRACE_FILE: &str = "tof_trace.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SIMULATE_FILE: &str = "simulate.csv";

/// Seed of the held-out test set derived from the run seed.
pub fn test_seed(seed: u64) -> u64 {
    noise::derive(seed, 0x7E57)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

// ---------------------------------------------------------------- gen-data

#[derive(Clone, Debug, PartialEq)]
pub struct GenReport {
    pub train_dir: PathBuf,
    pub test_dir: PathBuf,
    pub train_hash: String,
    pub test_hash: String,
    pub train_n: usize,
    pub test_n: usize,
}

/// Renders the training and test sets into `out/train` and `out/test`.
pub fn cmd_gen_data(cfg: &RunConfig, out: &Path) -> Result<GenReport> {
    cfg.validate()?;
    cfg.echo(out)?;
    let gen = cfg.generator();
    let train = generate_dataset(cfg.train_n, &gen, cfg.seed)?;
    let train_dir = out.join(TRAIN_DIR);
    save_dataset(&train, &train_dir)?;
    let train_hash = dataset_hash(&train);
    drop(train);
    let test = generate_dataset(cfg.test_n, &gen, test_seed(cfg.seed))?;
    let test_dir = out.join(TEST_DIR);
    save_dataset(&test, &test_dir)?;
    Ok(GenReport {
        train_dir,
        test_dir,
        train_hash,
        test_hash: dataset_hash(&test),
        train_n: cfg.train_n,
        test_n: cfg.test_n,
    })
}

// ------------------------------------------------------------------- train

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainMode {
    /// Hyperparameters from the config (`svr.x`, `svr.y`, `svr.z`).
    Fixed,
    /// The shipped defaults regardless of the config.
    Table1,
    /// Cross-validated grid search over `grid.*`.
    Grid,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub model_path: PathBuf,
    pub hyperparams: [SvrHyperparams; 3],
    pub stats: [TrainStats; 3],
    pub cv: Option<CvReport>,
    pub samples: usize,
    /// Feature extraction plus fitting, seconds.
    pub wall_time: f64,
}

/// Raw feature vectors of every frame in `ds`.
pub fn dataset_features(ds: &Dataset, cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let fc = cfg.filter_config();
    crate::par::map(&ds.samples, |s| extract_features(&s.image, &fc, cfg.grid_side).map(|f| f.values))
        .into_iter()
        .collect()
}

/// Training material without the frames: raw features, poses and the frame
/// size they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub raw: Vec<Vec<f64>>,
    pub poses: Vec<Pose>,
    pub width: usize,
    pub height: usize,
}

impl FeatureSet {
    pub fn from_dataset(ds: &Dataset, cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            raw: dataset_features(ds, cfg)?,
            poses: ds.poses(),
            width: ds.meta.width,
            height: ds.meta.height,
        })
    }

    /// Renders and featurizes the `n`-sample dataset of `seed` one frame at a
    /// time; identical to generating the dataset and calling
    /// [`FeatureSet::from_dataset`], without holding the frames.
    pub fn generate(n: usize, cfg: &RunConfig, seed: u64) -> Result<Self> {
        let gen = cfg.generator();
        let fc = cfg.filter_config();
        let poses: Vec<Pose> = sample_poses(n, &gen, seed)?.into_iter().map(|(_, p)| p).collect();
        let raw = crate::par::map_range(n, |i| {
            let g = render_sample(&gen, &poses[i], seed, i)?;
            extract_features(&g, &fc, cfg.grid_side).map(|f| f.values)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            raw,
            poses,
            width: cfg.width,
            height: cfg.height,
        })
    }
}

/// Fits a pose model on an in-memory dataset.
pub fn train_on(
    ds: &Dataset,
    cfg: &RunConfig,
    mode: TrainMode,
) -> Result<(PoseModel, [TrainStats; 3], [SvrHyperparams; 3], Option<CvReport>)> {
    train_features(&FeatureSet::from_dataset(ds, cfg)?, cfg, mode)
}

/// Fits a pose model on precomputed features.
pub fn train_features(
    fs: &FeatureSet,
    cfg: &RunConfig,
    mode: TrainMode,
) -> Result<(PoseModel, [TrainStats; 3], [SvrHyperparams; 3], Option<CvReport>)> {
    cfg.validate()?;
    if fs.raw.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let (raw, poses) = (&fs.raw, &fs.poses);
    let (hyperparams, cv) = match mode {
        TrainMode::Fixed => (cfg.svr, None),
        TrainMode::Table1 => (DEFAULT_HYPERPARAMS, None),
        TrainMode::Grid => {
            let grid = cfg.grid();
            let report = cross_validate(raw, poses, [&grid, &grid, &grid], cfg.folds, cfg.seed, &cfg.solver())?;
            (report.best, Some(report))
        }
    };
    let filter_config = cfg.filter_config();
    let training = PoseTraining {
        grid_side: cfg.grid_side,
        filter_config: &filter_config,
        image_width: fs.width,
        image_height: fs.height,
        hyperparams,
        solver: cfg.solver(),
    };
    let (model, stats) = train_pose_model(raw, poses, &training)?;
    Ok((model, stats, hyperparams, cv))
}

/// Trains on the dataset in `data` and writes `out/model.txt` (plus the CV
/// report in grid mode).
pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path, mode: TrainMode) -> Result<TrainReport> {
    cfg.validate()?;
    if !data.is_dir() {
        return Err(Error::MissingFile(data.to_path_buf()));
    }
    let ds = load_dataset(data)?;
    cfg.echo(out)?;
    let start = Instant::now();
    let (model, stats, hyperparams, cv) = train_on(&ds, cfg, mode)?;
    let wall_time = start.elapsed().as_secs_f64();
    let model_path = out.join(MODEL_FILE);
    save_model(&model, &model_path)?;
    if let Some(cv) = &cv {
        cv.save(&out.join(CV_REPORT_FILE))?;
    }
    Ok(TrainReport {
        model_path,
        hyperparams,
        stats,
        cv,
        samples: ds.len(),
        wall_time,
    })
}

// -------------------------------------------------------------------- eval

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Per-axis RMSE in mm, `[x, y, z]`.
    pub rmse: [f64; 3],
    pub n: usize,
}

/// Per-axis `sqrt(mean((pred - truth)^2))`.
pub fn axis_rmse(pred: &[Pose], truth: &[Pose]) -> Result<[f64; 3]> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} ground-truth poses",
            pred.len(),
            truth.len()
        )));
    }
    Ok(Axis::ALL.map(|a| {
        let se: f64 = pred
            .iter()
            .zip(truth)
            .map(|(p, t)| (p.component(a) - t.component(a)).powi(2))
            .sum();
        (se / pred.len() as f64).sqrt()
    }))
}

/// Predicts every sample of `ds` with all three axes.
pub fn predict_dataset(model: &PoseModel, ds: &Dataset) -> Result<Vec<Pose>> {
    crate::par::map(&ds.samples, |s| {
        model
            .predict_pose(&s.image, AxesMask::ALL)
            .map(|p| p.to_pose().expect("all axes requested"))
    })
    .into_iter()
    .collect()
}

pub fn evaluate(model: &PoseModel, ds: &Dataset) -> Result<(EvalReport, Vec<Pose>)> {
    let pred = predict_dataset(model, ds)?;
    let rmse = axis_rmse(&pred, &ds.poses())?;
    Ok((EvalReport { rmse, n: ds.len() }, pred))
}

pub fn write_eval<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "rmse_mm", "n"])?;
    for a in Axis::ALL {
        w.write_record([a.name(), &report.rmse[a as usize].to_string(), &report.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals<W: Write>(ds: &Dataset, pred: &[Pose], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "x_gt_mm", "y_gt_mm", "z_gt_mm", "x_pred_mm", "y_pred_mm", "z_pred_mm"])?;
    for (i, (s, p)) in ds.samples.iter().zip(pred).enumerate() {
        let g = s.pose;
        let mut row = vec![i.to_string()];
        row.extend([g.x, g.y, g.z, p.x, p.y, p.z].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluates `model` on the dataset in `data`; writes `eval.csv` and, when
/// asked, `residuals.csv`.
pub fn cmd_eval(cfg: &RunConfig, model: &Path, data: &Path, out: &Path, residuals: bool) -> Result<EvalReport> {
    cfg.validate()?;
    let pm = load_model(model)?;
    let ds = load_dataset(data)?;
    if ds.meta.width != pm.image_width || ds.meta.height != pm.image_height {
        return Err(Error::Dimension(format!(
            "dataset frames are {}x{}, model expects {}x{}",
            ds.meta.width, ds.meta.height, pm.image_width, pm.image_height
        )));
    }
    cfg.echo(out)?;
    let (report, pred) = evaluate(&pm, &ds)?;
    write_eval(&report, create(&out.join(EVAL_FILE))?)?;
    if residuals {
        write_residuals(&ds, &pred, create(&out.join(RESIDUALS_FILE))?)?;
    }
    Ok(report)
}

// ------------------------------------------------------------------- bench

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub axes: AxesMask,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    /// `1000 / mean_ms`.
    pub hz: f64,
}

/// Distinct frames for timing, rendered at the model's resolution.
pub fn bench_frames(model: &PoseModel, cfg: &RunConfig, count: usize) -> Result<Vec<GrayImage>> {
    let mut gen = cfg.generator();
    gen.camera.width = model.image_width;
    gen.camera.height = model.image_height;
    let poses = sample_poses(count, &gen, cfg.seed)?;
    crate::par::map(&poses, |(_, pose)| {
        render_frame(pose, &gen.pattern, &gen.camera, cfg.seed)
    })
    .into_iter()
    .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times `iterations` sequential `predict_pose` calls cycling over `frames`.
pub fn time_predictions(model: &PoseModel, frames: &[GrayImage], iterations: usize, axes: AxesMask) -> Result<BenchReport> {
    if frames.is_empty() || iterations == 0 {
        return Err(Error::Parameter("benchmark needs frames and iterations".into()));
    }
    model.predict_pose(&frames[0], axes)?;
    let mut lat = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let g = &frames[i % frames.len()];
        let t = Instant::now();
        let p = model.predict_pose(g, axes)?;
        lat.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(p);
    }
    let mean_ms = lat.iter().sum::<f64>() / lat.len() as f64;
    lat.sort_by(f64::total_cmp);
    Ok(BenchReport {
        frames: iterations,
        width: frames[0].width(),
        height: frames[0].height(),
        axes,
        mean_ms,
        p95_ms: percentile(&lat, 0.95),
        p99_ms: percentile(&lat, 0.99),
        hz: 1e3 / mean_ms,
    })
}

pub fn write_bench<W: Write>(reports: &[BenchReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axes", "width", "height", "frames", "mean_ms", "p95_ms", "p99_ms", "hz"])?;
    for r in reports {
        w.write_record([
            r.axes.to_string(),
            r.width.to_string(),
            r.height.to_string(),
            r.frames.to_string(),
            r.mean_ms.to_string(),
            r.p95_ms.to_string(),
            r.p99_ms.to_string(),
            r.hz.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Latency of the sensing path (rendering excluded) for `bench.axes`.
pub fn cmd_bench(cfg: &RunConfig, model: &Path, out: &Path) -> Result<BenchReport> {
    cfg.validate()?;
    let pm = load_model(model)?;
    cfg.echo(out)?;
    let frames = bench_frames(&pm, cfg, cfg.bench_frames.min(64))?;
    let report = time_predictions(&pm, &frames, cfg.bench_frames.max(1000), cfg.bench_axes)?;
    write_bench(std::slice::from_ref(&report), create(&out.join(BENCH_FILE))?)?;
    Ok(report)
}

// ------------------------------------------------------------- tof baseline

pub const UNDISTURBED: &str = "undisturbed";
pub const DISTURBED: &str = "disturbed";

#[derive(Clone, Debug, PartialEq)]
pub struct TofTraceRow {
    pub t: f64,
    pub phase: &'static str,
    pub z_gt: f64,
    pub z_tof: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TofReport {
    pub gain: f64,
    pub offset: f64,
    pub undisturbed_rmse: f64,
    pub disturbed_rmse: f64,
    pub trace: Vec<TofTraceRow>,
}

impl TofReport {
    pub fn ratio(&self) -> f64 {
        self.disturbed_rmse / self.undisturbed_rmse
    }
}

/// Slow pressure excitation sweeping the elongation between 10 and 100 mm.
fn excitation(plant: &PlantConfig, t: f64) -> f64 {
    let u = 0.5 - 0.5 * (std::f64::consts::TAU * t / 20.0).cos();
    plant.pressure_for(10.0 + 90.0 * u)
}

/// Plant trajectory under the excitation, sampled at `rate` for `duration`.
fn tof_run(disturbance: Disturbance, rate: f64, duration: f64) -> Vec<PlantState> {
    let plant = PlantConfig {
        disturbance,
        ..PlantConfig::default()
    };
    let dt = 1.0 / rate;
    let mut s = plant.equilibrium(excitation(&plant, 0.0));
    let steps = (duration * rate).round() as usize;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        s = step_plant(&s, excitation(&plant, s.time), dt, &plant);
        out.push(s);
    }
    out
}

fn rmse_of(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    for (a, b) in pairs {
        se += (a - b).powi(2);
        n += 1;
    }
    (se / n.max(1) as f64).sqrt()
}

/// Calibrates the simulated ToF sensor on a pure-z run, then evaluates it on
/// a run whose second half adds the lateral disturbance.
pub fn tof_baseline(cfg: &RunConfig) -> Result<TofReport> {
    cfg.validate()?;
    let (rate, dur) = (cfg.tof_rate_hz, cfg.tof_duration);
    let cal = tof_run(Disturbance::NONE, rate, dur);
    let cal_seed = noise::derive(cfg.seed, 0xCA1);
    let raw: Vec<f64> = cal
        .iter()
        .enumerate()
        .map(|(i, s)| simulate_tof(s, cfg.tof_noise, noise::derive(cal_seed, i as u64)))
        .collect();
    let z: Vec<f64> = cal.iter().map(|s| s.z).collect();
    let (gain, offset) = calibrate_linear(&raw, &z)?;

    let eval = tof_run(cfg.disturbance(dur), rate, 2.0 * dur);
    let eval_seed = noise::derive(cfg.seed, 0xE7A1);
    let trace: Vec<TofTraceRow> = eval
        .iter()
        .enumerate()
        .map(|(i, s)| TofTraceRow {
            t: s.time,
            phase: if s.time <= dur { UNDISTURBED } else { DISTURBED },
            z_gt: s.z,
            z_tof: gain * simulate_tof(s, cfg.tof_noise, noise::derive(eval_seed, i as u64)) + offset,
        })
        .collect();
    let phase_rmse = |phase: &str| {
        rmse_of(trace.iter().filter(|r| r.phase == phase).map(|r| (r.z_tof, r.z_gt)))
    };
    Ok(TofReport {
        gain,
        offset,
        undisturbed_rmse: phase_rmse(UNDISTURBED),
        disturbed_rmse: phase_rmse(DISTURBED),
        trace,
    })
}

pub fn write_tof<W: Write>(report: &TofReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phase", "rmse_mm", "gain", "offset"])?;
    for (phase, rmse) in [(UNDISTURBED, report.undisturbed_rmse), (DISTURBED, report.disturbed_rmse)] {
        w.write_record([phase, &rmse.to_string(), &report.gain.to_string(), &report.offset.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tof_trace<W: Write>(report: &TofReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "phase", "z_gt_mm", "z_tof_mm"])?;
    for r in &report.trace {
        w.write_record([r.t.to_string(), r.phase.to_string(), r.z_gt.to_string(), r.z_tof.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_tof_baseline(cfg: &RunConfig, out: &Path) -> Result<TofReport> {
    let report = tof_baseline(cfg)?;
    cfg.echo(out)?;
    write_tof(&report, create(&out.join(TOF_FILE))?)?;
    write_tof_trace(&report, create(&out.join(TOF_TRACE_FILE))?)?;
    Ok(report)
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug)]
pub struct SimReport {
    pub log: TrajectoryLog,
    /// RMSE between camera estimate and true elongation (mm).
    pub sensing_rmse: f64,
    /// RMSE between true elongation and setpoint (mm).
    pub tracking_rmse: f64,
    /// Largest `|z_gt - z_sp|` over the final second of each step (mm).
    pub step_errors: Vec<f64>,
}

/// Worst tracking error within the last `window` seconds of every step.
pub fn steady_state_errors(log: &TrajectoryLog, sp: &Setpoints, duration: f64, window: f64) -> Vec<f64> {
    let pts = sp.points();
    (0..pts.len())
        .map(|i| {
            let (start, level) = pts[i];
            let end = pts.get(i + 1).map_or(duration, |p| p.0);
            let from = (end - window).max(start);
            log.rows
                .iter()
                .filter(|r| r.t >= from - 1e-9 && r.t < end - 1e-9)
                .map(|r| (r.z_gt - level).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Runs the closed loop on the configured staircase. `model = None` uses
/// perfect sensing (the estimate equals the true elongation).
pub fn simulate(cfg: &RunConfig, model: Option<&PoseModel>) -> Result<SimReport> {
    cfg.validate()?;
    let sp = cfg.setpoints()?;
    let cl = cfg.closed_loop();
    let pattern = PatternSpec::default();
    let camera = match model {
        Some(m) => crate::plantsim::Camera {
            width: m.image_width,
            height: m.image_height,
            ..cfg.camera()
        },
        None => cfg.camera(),
    };
    let feedback = match model {
        Some(model) => Feedback::Camera {
            model,
            pattern: &pattern,
            camera: &camera,
            seed: frame_seed(cfg.seed, 0x51),
        },
        None => Feedback::GroundTruth,
    };
    let log = run_closed_loop(&sp, feedback, &cl)?;
    if !log.is_finite() {
        return Err(Error::Parameter("closed loop diverged".into()));
    }
    Ok(SimReport {
        sensing_rmse: log.sensing_rmse(),
        tracking_rmse: log.tracking_rmse(),
        step_errors: steady_state_errors(&log, &sp, cl.duration, 1.0),
        log,
    })
}

pub fn write_sim_summary<W: Write>(report: &SimReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value_mm"])?;
    w.write_record(["rmse_cm_vs_gt", &report.sensing_rmse.to_string()])?;
    w.write_record(["rmse_gt_vs_sp", &report.tracking_rmse.to_string()])?;
    for (i, e) in report.step_errors.iter().enumerate() {
        w.write_record([format!("step{}_steady_error", i + 1), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Closed-loop run; writes `trajectory.csv` and `simulate.csv`.
pub fn cmd_simulate(cfg: &RunConfig, model: Option<&Path>, out: &Path) -> Result<SimReport> {
    cfg.validate()?;
    let pm = model.map(load_model).transpose()?;
    let report = simulate(cfg, pm.as_ref())?;
    cfg.echo(out)?;
    report.log.write_csv(create(&out.join(TRAJECTORY_FILE))?)?;
    write_sim_summary(&report, create(&out.join(SIMULATE_FILE))?)?;
    Ok(report)
}
