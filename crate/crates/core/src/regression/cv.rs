use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rmse;
use super::smo::SolverOptions;
use super::svr::{train_svr, SvrHyperparams};
use crate::error::{Error, Result};
use crate::features::Normalizer;
use crate::pose::{Axis, Pose};

/// One grid point's cross-validated score for one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub axis: Axis,
    pub hyperparams: SvrHyperparams,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

/// Full outcome of a grid search.
#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    /// Selected hyperparameters `[x, y, z]`.
    pub best: [SvrHyperparams; 3],
    /// Mean validation RMSE of each selected point.
    pub best_rmse: [f64; 3],
    pub rows: Vec<CvRow>,
    pub folds: usize,
    pub seed: u64,
}

/// Default search grid: every combination of
/// `eps in {0.25, 0.5, 1, 2}`, `K in {10, 50, 100, 200, 400}`,
/// `gamma in {0.002, 0.005, 0.02, 0.06, 0.2}`.
pub fn default_grid() -> Vec<SvrHyperparams> {
    let mut g = Vec::new();
    for &epsilon in &[0.25, 0.5, 1.0, 2.0] {
        for &cost in &[10.0, 50.0, 100.0, 200.0, 400.0] {
            for &gamma in &[0.002, 0.005, 0.02, 0.06, 0.2] {
                g.push(SvrHyperparams::new(epsilon, cost, gamma));
            }
        }
    }
    g
}

/// Fold index of every sample: a seeded shuffle cut into contiguous folds
/// whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        fold[idx] = pos * folds / n;
    }
    fold
}

/// `a` is preferred over `b` at equal score: smaller K, then smaller gamma,
/// then larger epsilon.
fn simpler(a: &SvrHyperparams, b: &SvrHyperparams) -> std::cmp::Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then(a.gamma.total_cmp(&b.gamma))
        .then(b.epsilon.total_cmp(&a.epsilon))
}

struct FoldData {
    train_x: Vec<Vec<f64>>,
    train_idx: Vec<usize>,
    val_x: Vec<Vec<f64>>,
    val_idx: Vec<usize>,
}

/// Grid-search cross-validation of the three axis regressors.
///
/// `grids` holds the candidate points for `[x, y, z]`. Each fold fits its own
/// feature normalizer on its training part. Targets are left in mm.
pub fn cross_validate<V: AsRef<[f64]> + Sync>(
    raw: &[V],
    poses: &[Pose],
    grids: [&[SvrHyperparams]; 3],
    folds: usize,
    seed: u64,
    solver: &SolverOptions,
) -> Result<CvReport> {
    if grids.iter().any(|g| g.is_empty()) {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    for hp in grids.iter().flat_map(|g| g.iter()) {
        hp.validate()?;
    }
    if raw.len() != poses.len() {
        return Err(Error::Dimension(format!(
            "{} feature vectors but {} poses",
            raw.len(),
            poses.len()
        )));
    }
    if folds < 2 {
        return Err(Error::Parameter("need at least 2 folds".into()));
    }
    // Each training part needs >= 2 samples, each validation part >= 1.
    if raw.len() < 2 * folds {
        return Err(Error::Parameter(format!(
            "{} samples is too few for {folds}-fold validation",
            raw.len()
        )));
    }

    let assign = fold_assignment(raw.len(), folds, seed);
    let data = (0..folds)
        .map(|k| {
            let train_idx: Vec<usize> = (0..raw.len()).filter(|&i| assign[i] != k).collect();
            let val_idx: Vec<usize> = (0..raw.len()).filter(|&i| assign[i] == k).collect();
            let train_raw: Vec<&[f64]> = train_idx.iter().map(|&i| raw[i].as_ref()).collect();
            let norm = Normalizer::fit(&train_raw)?;
            let nz = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
                idx.iter().map(|&i| norm.normalize(raw[i].as_ref())).collect()
            };
            Ok(FoldData {
                train_x: nz(&train_idx)?,
                val_x: nz(&val_idx)?,
                train_idx,
                val_idx,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::new();
    for axis in Axis::ALL {
        for (g, _) in grids[axis as usize].iter().enumerate() {
            for k in 0..folds {
                tasks.push((axis, g, k));
            }
        }
    }
    let scores = crate::par::map(&tasks, |&(axis, g, k)| -> Result<f64> {
        let hp = grids[axis as usize][g];
        let fd = &data[k];
        let y: Vec<f64> = fd.train_idx.iter().map(|&i| poses[i].component(axis)).collect();
        let (model, _) = train_svr(&fd.train_x, &y, &hp, solver)?;
        let pred: Vec<f64> = fd.val_x.iter().map(|u| model.predict_unchecked(u)).collect();
        let truth: Vec<f64> = fd.val_idx.iter().map(|&i| poses[i].component(axis)).collect();
        Ok(rmse(&pred, &truth))
    });
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut chunks = scores.chunks_exact(folds);
    for axis in Axis::ALL {
        for &hp in grids[axis as usize] {
            let fold_rmse = chunks.next().expect("one chunk per task group").to_vec();
            let mean_rmse = fold_rmse.iter().sum::<f64>() / folds as f64;
            rows.push(CvRow {
                axis,
                hyperparams: hp,
                fold_rmse,
                mean_rmse,
            });
        }
    }

    let mut best = [grids[0][0]; 3];
    let mut best_rmse = [0.0; 3];
    for axis in Axis::ALL {
        let winner = rows
            .iter()
            .filter(|r| r.axis == axis)
            .min_by(|a, b| {
                a.mean_rmse
                    .total_cmp(&b.mean_rmse)
                    .then_with(|| simpler(&a.hyperparams, &b.hyperparams))
            })
            .expect("non-empty grid");
        best[axis as usize] = winner.hyperparams;
        best_rmse[axis as usize] = winner.mean_rmse;
    }
    Ok(CvReport {
        best,
        best_rmse,
        rows,
        folds,
        seed,
    })
}

/// Writes the score table as CSV, one grid point per row.
pub fn write_cv_report<W: Write>(report: &CvReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["axis".to_string(), "epsilon".into(), "k".into(), "gamma".into()];
    header.extend((1..=report.folds).map(|k| format!("rmse_fold{k}")));
    header.push("mean_rmse".into());
    header.push("seed".into());
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.axis.name().to_string(),
            r.hyperparams.epsilon.to_string(),
            r.hyperparams.cost.to_string(),
            r.hyperparams.gamma.to_string(),
        ];
        rec.extend(r.fold_rmse.iter().map(|v| format!("{v:.6}")));
        rec.push(format!("{:.6}", r.mean_rmse));
        rec.push(report.seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

impl CvReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_cv_report(self, std::fs::File::create(path)?)
    }
}
