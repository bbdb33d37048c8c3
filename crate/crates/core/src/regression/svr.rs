use super::kernel::{rbf, DataMatrix};
use super::smo::{solve, DualSolution, SolverOptions};
use crate::error::{Error, Result};

/// Hyperparameters of one epsilon-SVR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrHyperparams {
    /// Half-width of the insensitive tube, in target units (mm).
    pub epsilon: f64,
    /// Box constraint `K` on the dual coefficients.
    pub cost: f64,
    /// RBF width in normalized feature space.
    pub gamma: f64,
}

impl SvrHyperparams {
    pub const fn new(epsilon: f64, cost: f64, gamma: f64) -> Self {
        Self {
            epsilon,
            cost,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !(self.cost > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::Parameter(format!(
                "need epsilon >= 0, K > 0, gamma > 0; got {self:?}"
            )));
        }
        if !(self.epsilon.is_finite() && self.cost.is_finite() && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("non-finite hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Shipped hyperparameters for `S = 3`, per axis `[x, y, z]`.
pub const DEFAULT_HYPERPARAMS: [SvrHyperparams; 3] = [
    SvrHyperparams::new(0.96, 112.5, 0.060),
    SvrHyperparams::new(0.96, 112.5, 0.060),
    SvrHyperparams::new(1.00, 189.0, 0.005),
];

/// A trained regressor: `f(u) = sum_i c_i k(sv_i, u) + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    pub hyperparams: SvrHyperparams,
    /// Feature dimension.
    pub dim: usize,
    /// Support vectors, row-major `n_sv x dim`.
    pub support_vectors: Vec<f64>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
}

/// Solver diagnostics for one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainStats {
    pub iterations: usize,
    pub violation: f64,
    pub objective: f64,
}

impl SvrModel {
    pub fn num_support_vectors(&self) -> usize {
        self.dual_coefs.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f64] {
        &self.support_vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Evaluates the regressor on a normalized feature vector.
    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {}",
                self.dim,
                u.len()
            )));
        }
        Ok(self.predict_unchecked(u))
    }

    pub(crate) fn predict_unchecked(&self, u: &[f64]) -> f64 {
        let gamma = self.hyperparams.gamma;
        let mut acc = 0.0;
        for (sv, &c) in self.support_vectors.chunks_exact(self.dim).zip(&self.dual_coefs) {
            acc += c * rbf(sv, u, gamma);
        }
        acc + self.bias
    }
}

/// Trains an epsilon-SVR on normalized features `x` and targets `y`.
pub fn train_svr<V: AsRef<[f64]>>(
    x: &[V],
    y: &[f64],
    hp: &SvrHyperparams,
    opts: &SolverOptions,
) -> Result<(SvrModel, TrainStats)> {
    let (model, stats, _) = train_svr_full(x, y, hp, opts)?;
    Ok((model, stats))
}

/// Like [`train_svr`], also returning the dual coefficient of every training
/// point.
pub fn train_svr_full<V: AsRef<[f64]>>(
    x: &[V],
    y: &[f64],
    hp: &SvrHyperparams,
    opts: &SolverOptions,
) -> Result<(SvrModel, TrainStats, DualSolution)> {
    hp.validate()?;
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Parameter("SVR needs at least 2 training points".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite training target".into()));
    }
    let m = DataMatrix::from_rows(x)?;
    let sol = solve(&m, y, hp.epsilon, hp.cost, hp.gamma, opts)?;
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &c) in sol.coefs.iter().enumerate() {
        if c != 0.0 {
            support_vectors.extend_from_slice(m.row(i));
            dual_coefs.push(c);
        }
    }
    let model = SvrModel {
        hyperparams: *hp,
        dim: m.cols,
        support_vectors,
        dual_coefs,
        bias: sol.bias,
    };
    let stats = TrainStats {
        iterations: sol.iterations,
        violation: sol.violation,
        objective: sol.objective,
    };
    Ok((model, stats, sol))
}
