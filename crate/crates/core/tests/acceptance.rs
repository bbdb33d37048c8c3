//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to the
//! real stdout (bypassing the test harness capture) and then asserts.
//!
//! Criteria share one lock so timings are not distorted by concurrently
//! running tests.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use bellowsense::datastore::{dataset_hash, write_model};
use bellowsense::features::{extract_features, feature_len};
use bellowsense::harness::*;
use bellowsense::imaging::*;
use bellowsense::plantsim::{generate_dataset, render_frame, Camera, PatternSpec};
use bellowsense::regression::*;
use bellowsense::{Axis, Pose};
use common::{random_image, reference, svr_instance, svr_oracle_gaps};

/// Hyperparameters used for the synthetic-accuracy model, chosen by grid
/// search on synthetic data (the shipped defaults target the hardware).
const SYNTHETIC_HP: SvrHyperparams = SvrHyperparams::new(0.1, 400.0, 0.005);

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {id} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
    assert!(pass, "{line}");
}

fn accuracy_config(z_lo: f64) -> RunConfig {
    let mut cfg = RunConfig {
        width: 320,
        height: 240,
        train_n: 2000,
        test_n: 500,
        svr: [SYNTHETIC_HP; 3],
        ..RunConfig::default()
    };
    cfg.workspace.z = (z_lo, 100.0);
    cfg
}

/// Trains on 2000 synthetic samples and featurizes the 500-sample test set.
fn accuracy_run(z_lo: f64) -> (PoseModel, FeatureSet) {
    let cfg = accuracy_config(z_lo);
    let train = FeatureSet::generate(cfg.train_n, &cfg, cfg.seed).unwrap();
    let (model, ..) = train_features(&train, &cfg, TrainMode::Fixed).unwrap();
    let test = FeatureSet::generate(cfg.test_n, &cfg, test_seed(cfg.seed)).unwrap();
    (model, test)
}

struct AccuracyModel {
    model: PoseModel,
    test: FeatureSet,
    seconds: f64,
}

fn accuracy_model() -> &'static AccuracyModel {
    static CELL: OnceLock<AccuracyModel> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let (model, test) = accuracy_run(20.0);
        AccuracyModel {
            model,
            test,
            seconds: t.elapsed().as_secs_f64(),
        }
    })
}

fn predict_raw(model: &PoseModel, raw: &[f64]) -> Pose {
    let u = model.normalizer.normalize(raw).unwrap();
    let [x, y, z] = Axis::ALL.map(|a| model.axis_model(a).predict(&u).unwrap());
    Pose::new(x, y, z)
}

fn subset_rmse(model: &PoseModel, test: &FeatureSet, keep: impl Fn(&Pose) -> bool) -> ([f64; 3], usize) {
    let (pred, truth): (Vec<Pose>, Vec<Pose>) = test
        .raw
        .iter()
        .zip(&test.poses)
        .filter(|(_, p)| keep(p))
        .map(|(r, p)| (predict_raw(model, r), *p))
        .unzip();
    (axis_rmse(&pred, &truth).unwrap(), truth.len())
}

#[test]
fn criterion_1_feature_dimensionality() {
    let _g = serial();
    let g = render_frame(&Pose::new(2.0, -3.0, 60.0), &PatternSpec::default(), &Camera::new(320, 240), 1).unwrap();
    let cfg = FilterConfig::default();
    let lens: Vec<usize> = (1..=4).map(|s| extract_features(&g, &cfg, s).unwrap().len()).collect();
    let pass = lens == [6, 24, 54, 96] && (1..=4).all(|s| feature_len(s) == lens[s - 1]);
    verdict(1, "feature dimensionality", pass, &format!("S=1..4 -> {lens:?}"));
}

#[test]
fn criterion_2_filter_oracle_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let cfg = FilterConfig::default();
    let mut mismatches = Vec::new();
    for seed in 0..50u64 {
        let g = random_image(32, 32, seed);
        let (r, gg) = (random_image(32, 32, seed + 1000), random_image(32, 32, seed + 2000));
        let rgb_data = (0..32 * 32).flat_map(|i| [r.data()[i], gg.data()[i], g.data()[i]]).collect();
        let rgb = RgbImage::from_raw(32, 32, rgb_data).unwrap();
        let a = adaptive_threshold(&g, &cfg).unwrap();
        let checks = [
            ("grayscale", to_grayscale(&rgb) == reference::grayscale(&rgb)),
            ("adaptive", a == reference::adaptive_threshold(&g, &cfg)),
            ("binary", binary_threshold(&g, cfg.binary_offset) == reference::binary_threshold(&g, cfg.binary_offset)),
            ("canny", canny(&g, &cfg).unwrap() == reference::canny(&g, &cfg)),
            ("dilate", morph(&a, MorphMode::Dilate, &cfg) == reference::morph(&a, cfg.morph_kernel, true)),
            ("erode", morph(&a, MorphMode::Erode, &cfg) == reference::morph(&a, cfg.morph_kernel, false)),
        ];
        mismatches.extend(checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| format!("{n}@{seed}")));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && secs < 30.0;
    verdict(
        2,
        "filter oracle equivalence",
        pass,
        &format!("6 filters x 50 images, {} mismatches {:?}, {secs:.2} s", mismatches.len(), mismatches),
    );
}

#[test]
fn criterion_3_svr_oracle_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let gaps: Vec<(f64, f64)> = (0..5).map(|s| svr_oracle_gaps(&svr_instance(s), 100 + s)).collect();
    let secs = t.elapsed().as_secs_f64();
    let worst_rel = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let worst_pred = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    let pass = worst_rel < 1e-4 && worst_pred < 1e-3 && secs < 60.0;
    verdict(
        3,
        "SVR oracle equivalence",
        pass,
        &format!("5 instances, max objective gap {worst_rel:.2e}, max prediction gap {worst_pred:.2e} mm, {secs:.1} s"),
    );
}

#[test]
fn criterion_4_default_hyperparameters_and_grid_search() {
    let _g = serial();
    let table = [
        SvrHyperparams::new(0.96, 112.5, 0.060),
        SvrHyperparams::new(0.96, 112.5, 0.060),
        SvrHyperparams::new(1.00, 189.0, 0.005),
    ];
    let defaults_ok = DEFAULT_HYPERPARAMS == table && RunConfig::default().svr == table;

    let mut cfg = RunConfig::ci();
    cfg.train_n = 250;
    cfg.grid_epsilon = vec![0.5, 0.96, 1.0];
    cfg.grid_cost = vec![50.0, 112.5, 189.0];
    cfg.grid_gamma = vec![0.005, 0.02, 0.06];
    let grid = cfg.grid();
    let contains_table = table.iter().all(|h| grid.contains(h));
    let fs = FeatureSet::generate(cfg.train_n, &cfg, cfg.seed).unwrap();
    let run = || {
        cross_validate(&fs.raw, &fs.poses, [&grid, &grid, &grid], cfg.folds, cfg.seed, &cfg.solver()).unwrap()
    };
    let (a, b) = (run(), run());
    let deterministic = a.best == b.best && a.best_rmse == b.best_rmse && a.rows == b.rows;
    let finite = a.best_rmse.iter().all(|r| r.is_finite())
        && a.best.iter().all(|h| h.epsilon.is_finite() && h.cost.is_finite() && h.gamma.is_finite());
    // The winner must be the tie-break-minimal point among those with the
    // lowest mean RMSE.
    let tie_rule = Axis::ALL.iter().enumerate().all(|(i, &axis)| {
        let rows: Vec<&CvRow> = a.rows.iter().filter(|r| r.axis == axis).collect();
        let best = rows.iter().map(|r| r.mean_rmse).fold(f64::INFINITY, f64::min);
        let mut tied: Vec<SvrHyperparams> = rows.iter().filter(|r| r.mean_rmse == best).map(|r| r.hyperparams).collect();
        tied.sort_by(|p, q| {
            p.cost
                .total_cmp(&q.cost)
                .then(p.gamma.total_cmp(&q.gamma))
                .then(q.epsilon.total_cmp(&p.epsilon))
        });
        tied.first() == Some(&a.best[i]) && best == a.best_rmse[i]
    });
    let pass = defaults_ok && contains_table && deterministic && finite && tie_rule;
    let fmt = |h: &SvrHyperparams| format!("({}, {}, {})", h.epsilon, h.cost, h.gamma);
    verdict(
        4,
        "Table I defaults and grid search",
        pass,
        &format!(
            "defaults {}, {}-point grid incl. Table I, selected x {} y {} z {}, repeatable {deterministic}",
            if defaults_ok { "match" } else { "differ" },
            grid.len(),
            fmt(&a.best[0]),
            fmt(&a.best[1]),
            fmt(&a.best[2]),
        ),
    );
}

#[test]
fn criterion_5_synthetic_sensing_accuracy() {
    let _g = serial();
    let t = Instant::now();
    let acc = accuracy_model();
    let (rmse, n) = subset_rmse(&acc.model, &acc.test, |_| true);
    let cfg = accuracy_config(20.0);
    let limits = [cfg.workspace.x, cfg.workspace.y, cfg.workspace.z].map(|(lo, hi)| 0.02 * (hi - lo));
    let accurate = (0..3).all(|i| rmse[i] < limits[i]);

    // Degradation below the lighting knee: same recipe over z in [0, 100].
    let (low_model, low_test) = accuracy_run(0.0);
    let (below, n_below) = subset_rmse(&low_model, &low_test, |p| p.z < 20.0);
    let (above, n_above) = subset_rmse(&low_model, &low_test, |p| p.z >= 20.0);
    let ratios: Vec<f64> = (0..3).map(|i| below[i] / above[i]).collect();
    let degraded = n_below > 0 && n_above > 0 && ratios.iter().all(|r| *r >= 2.0);

    let secs = acc.seconds + t.elapsed().as_secs_f64();
    let pass = accurate && degraded && secs < 900.0;
    verdict(
        5,
        "synthetic sensing accuracy",
        pass,
        &format!(
            "test RMSE x {:.3} y {:.3} z {:.3} mm on {n} samples (limits {:.1}/{:.1}/{:.1}); \
             z<20 vs z>=20 RMSE ratio x {:.1} y {:.1} z {:.1} ({n_below}/{n_above} samples); {secs:.0} s",
            rmse[0], rmse[1], rmse[2], limits[0], limits[1], limits[2], ratios[0], ratios[1], ratios[2]
        ),
    );
}

#[test]
fn criterion_6_throughput() {
    let _g = serial();
    let cfg = RunConfig::default();
    let train = FeatureSet::generate(cfg.train_n, &cfg, cfg.seed).unwrap();
    let (model, ..) = train_features(&train, &cfg, TrainMode::Table1).unwrap();
    drop(train);
    let frames = bench_frames(&model, &cfg, 64).unwrap();
    let all = time_predictions(&model, &frames, 1000, AxesMask::ALL).unwrap();
    let z = time_predictions(&model, &frames, 1000, AxesMask::Z_ONLY).unwrap();
    let nsv: Vec<usize> = Axis::ALL.iter().map(|&a| model.axis_model(a).num_support_vectors()).collect();
    let pass = all.hz >= 40.0 && z.hz >= 50.0;
    verdict(
        6,
        "throughput",
        pass,
        &format!(
            "640x480 S=3, 9000-sample model ({nsv:?} SVs), {} threads: all axes {:.1} Hz (mean {:.2} ms, p95 {:.2}, p99 {:.2}); z only {:.1} Hz (mean {:.2} ms)",
            if bellowsense::par::is_parallel() { "rayon" } else { "sequential" },
            all.hz, all.mean_ms, all.p95_ms, all.p99_ms, z.hz, z.mean_ms
        ),
    );
}

#[test]
fn criterion_7_tof_baseline_shape() {
    let _g = serial();
    let r = tof_baseline(&RunConfig::default()).unwrap();
    let pass = r.undisturbed_rmse < r.disturbed_rmse && r.ratio() >= 2.0;
    verdict(
        7,
        "ToF baseline shape",
        pass,
        &format!(
            "{UNDISTURBED} {:.3} mm, {DISTURBED} {:.3} mm, ratio {:.2}",
            r.undisturbed_rmse,
            r.disturbed_rmse,
            r.ratio()
        ),
    );
}

#[test]
fn criterion_8_closed_loop_tracking() {
    let _g = serial();
    let acc = accuracy_model();
    let t = Instant::now();
    let cfg = RunConfig {
        width: acc.model.image_width,
        height: acc.model.image_height,
        ..RunConfig::default()
    };
    let r = simulate(&cfg, Some(&acc.model));
    let secs = t.elapsed().as_secs_f64();
    let (pass, detail) = match r {
        Ok(r) => {
            let worst = r.step_errors.iter().cloned().fold(0.0, f64::max);
            let pass = r.step_errors.len() == 6 && worst < 1.0 && r.sensing_rmse < 1.5 && r.log.is_finite() && secs < 300.0;
            (
                pass,
                format!(
                    "6 steps at {}/{} Hz, worst final-second |z_GT-z_SP| {worst:.3} mm, RMSE(z_CM,z_GT) {:.3} mm, {secs:.0} s",
                    cfg.sim_position_hz, cfg.sim_pressure_hz, r.sensing_rmse
                ),
            )
        }
        Err(e) => (false, format!("run failed: {e}")),
    };
    verdict(8, "closed-loop tracking", pass, &detail);
}

#[test]
fn criterion_9_determinism() {
    let _g = serial();
    let mut cfg = RunConfig::ci();
    cfg.train_n = 150;
    cfg.test_n = 20;
    cfg.sim_levels = vec![40.0, 60.0];
    cfg.sim_hold = 3.0;

    let gen = || {
        let train = generate_dataset(cfg.train_n, &cfg.generator(), cfg.seed).unwrap();
        let test = generate_dataset(cfg.test_n, &cfg.generator(), test_seed(cfg.seed)).unwrap();
        (train, test)
    };
    let (train_a, test_a) = gen();
    let (train_b, test_b) = gen();
    let data_ok = dataset_hash(&train_a) == dataset_hash(&train_b) && dataset_hash(&test_a) == dataset_hash(&test_b);

    let train = |ds| write_model(&train_on(ds, &cfg, TrainMode::Table1).unwrap().0).unwrap();
    let (model_a, model_b) = (train(&train_a), train(&train_b));
    let model_ok = model_a == model_b;

    let model = bellowsense::datastore::read_model(&model_a).unwrap();
    let eval_ok = evaluate(&model, &test_a).unwrap() == evaluate(&model, &test_b).unwrap();
    let log = || {
        let mut csv = Vec::new();
        simulate(&cfg, Some(&model)).unwrap().log.write_csv(&mut csv).unwrap();
        csv
    };
    let log_ok = log() == log();

    let cv = || {
        let fs = FeatureSet::from_dataset(&train_a, &cfg).unwrap();
        let grid = [SvrHyperparams::new(0.5, 50.0, 0.02), SvrHyperparams::new(1.0, 100.0, 0.005)];
        let mut out = Vec::new();
        write_cv_report(
            &cross_validate(&fs.raw, &fs.poses, [&grid, &grid, &grid], 5, 9, &cfg.solver()).unwrap(),
            &mut out,
        )
        .unwrap();
        out
    };
    let cv_ok = cv() == cv();

    let pass = data_ok && model_ok && eval_ok && log_ok && cv_ok;
    verdict(
        9,
        "determinism",
        pass,
        &format!("dataset hashes {data_ok}, model files {model_ok}, eval {eval_ok}, trajectory logs {log_ok}, CV reports {cv_ok}"),
    );
}
