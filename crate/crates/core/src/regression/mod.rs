//! Epsilon-insensitive support vector regression with an RBF kernel,
//! per-axis pose models and grid-search cross-validation.

mod cv;
mod kernel;
mod pose_model;
mod smo;
mod svr;

pub use cv::{
    cross_validate, default_grid, fold_assignment, write_cv_report, CvReport, CvRow,
};
pub use kernel::{rbf_kernel, DataMatrix};
pub use pose_model::{
    predict_pose, train_pose_model, AxesMask, PoseModel, PosePrediction, PoseTraining,
};
pub use smo::{DualSolution, SolverOptions};
pub use svr::{train_svr, train_svr_full, SvrHyperparams, SvrModel, TrainStats, DEFAULT_HYPERPARAMS};

/// Root-mean-square difference of two equally long series.
pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return 0.0;
    }
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    (ss / pred.len() as f64).sqrt()
}
