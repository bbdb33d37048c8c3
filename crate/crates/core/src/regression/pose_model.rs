use super::smo::SolverOptions;
use super::svr::{train_svr, SvrHyperparams, SvrModel, TrainStats};
use crate::error::{Error, Result};
use crate::features::{extract_features, feature_len, Normalizer, BLOCK_ORDER};
use crate::imaging::{FilterConfig, GrayImage};
use crate::pose::{Axis, Pose};

/// Three per-axis regressors sharing one feature pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseModel {
    pub model_x: SvrModel,
    pub model_y: SvrModel,
    pub model_z: SvrModel,
    pub normalizer: Normalizer,
    pub grid_side: usize,
    pub filter_config: FilterConfig,
    pub block_order: String,
    /// Frame size the model was trained on.
    pub image_width: usize,
    pub image_height: usize,
}

/// Which components `predict_pose` evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxesMask {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl AxesMask {
    pub const ALL: AxesMask = AxesMask {
        x: true,
        y: true,
        z: true,
    };
    pub const Z_ONLY: AxesMask = AxesMask {
        x: false,
        y: false,
        z: true,
    };

    pub fn contains(&self, axis: Axis) -> bool {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    /// Parses a subset of `"xyz"`, e.g. `"z"` or `"xyz"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut m = AxesMask {
            x: false,
            y: false,
            z: false,
        };
        for ch in s.chars() {
            match ch {
                'x' => m.x = true,
                'y' => m.y = true,
                'z' => m.z = true,
                _ => return Err(Error::Parameter(format!("bad axes mask {s:?}"))),
            }
        }
        if !(m.x || m.y || m.z) {
            return Err(Error::Parameter("axes mask selects nothing".into()));
        }
        Ok(m)
    }
}

impl std::fmt::Display for AxesMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for axis in Axis::ALL {
            if self.contains(axis) {
                f.write_str(axis.name())?;
            }
        }
        Ok(())
    }
}

/// Predicted components; disabled axes are `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosePrediction {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

impl PosePrediction {
    pub fn get(&self, axis: Axis) -> Option<f64> {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    /// All three components, if present.
    pub fn to_pose(&self) -> Option<Pose> {
        Some(Pose::new(self.x?, self.y?, self.z?))
    }
}

impl PoseModel {
    pub fn axis_model(&self, axis: Axis) -> &SvrModel {
        match axis {
            Axis::X => &self.model_x,
            Axis::Y => &self.model_y,
            Axis::Z => &self.model_z,
        }
    }

    /// Checks the structural invariants shared by all three regressors.
    pub fn validate(&self) -> Result<()> {
        if self.block_order != BLOCK_ORDER {
            return Err(Error::BlockOrder {
                expected: BLOCK_ORDER.into(),
                found: self.block_order.clone(),
            });
        }
        let dim = feature_len(self.grid_side);
        if self.normalizer.dim() != dim {
            return Err(Error::Dimension(format!(
                "normalizer has {} entries, grid side {} needs {dim}",
                self.normalizer.dim(),
                self.grid_side
            )));
        }
        for axis in Axis::ALL {
            let m = self.axis_model(axis);
            if m.dim != dim || m.support_vectors.len() != m.dim * m.dual_coefs.len() {
                return Err(Error::Dimension(format!(
                    "{axis} model has inconsistent dimensions"
                )));
            }
        }
        self.filter_config.validate()
    }

    /// Normalized feature vector of a frame.
    pub fn features(&self, g: &GrayImage) -> Result<Vec<f64>> {
        if g.width() != self.image_width || g.height() != self.image_height {
            return Err(Error::Dimension(format!(
                "frame is {}x{}, model expects {}x{}",
                g.width(),
                g.height(),
                self.image_width,
                self.image_height
            )));
        }
        let raw = extract_features(g, &self.filter_config, self.grid_side)?;
        self.normalizer.normalize(&raw.values)
    }

    /// Predicts the selected components of the pose from a frame.
    pub fn predict_pose(&self, g: &GrayImage, mask: AxesMask) -> Result<PosePrediction> {
        let u = self.features(g)?;
        let eval = |axis: Axis| {
            mask.contains(axis)
                .then(|| self.axis_model(axis).predict_unchecked(&u))
        };
        Ok(PosePrediction {
            x: eval(Axis::X),
            y: eval(Axis::Y),
            z: eval(Axis::Z),
        })
    }
}

/// Free-function form of [`PoseModel::predict_pose`].
pub fn predict_pose(pm: &PoseModel, g: &GrayImage, mask: AxesMask) -> Result<PosePrediction> {
    pm.predict_pose(g, mask)
}

/// Everything needed to fit a [`PoseModel`] from raw features.
#[derive(Clone, Debug)]
pub struct PoseTraining<'a> {
    pub grid_side: usize,
    pub filter_config: &'a FilterConfig,
    pub image_width: usize,
    pub image_height: usize,
    /// Hyperparameters `[x, y, z]`.
    pub hyperparams: [SvrHyperparams; 3],
    pub solver: SolverOptions,
}

/// Fits the normalizer on `raw` features and trains the three regressors
/// (in parallel when enabled).
pub fn train_pose_model<V: AsRef<[f64]> + Sync>(
    raw: &[V],
    poses: &[Pose],
    t: &PoseTraining<'_>,
) -> Result<(PoseModel, [TrainStats; 3])> {
    if raw.len() != poses.len() {
        return Err(Error::Dimension(format!(
            "{} feature vectors but {} poses",
            raw.len(),
            poses.len()
        )));
    }
    let dim = feature_len(t.grid_side);
    if let Some(bad) = raw.iter().find(|r| r.as_ref().len() != dim) {
        return Err(Error::Dimension(format!(
            "feature length {} does not match grid side {} ({dim})",
            bad.as_ref().len(),
            t.grid_side
        )));
    }
    let normalizer = Normalizer::fit(raw)?;
    let normalized = raw
        .iter()
        .map(|r| normalizer.normalize(r.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let fits = crate::par::map(&Axis::ALL, |&axis| {
        let y: Vec<f64> = poses.iter().map(|p| p.component(axis)).collect();
        let hp = t.hyperparams[axis as usize];
        train_svr(&normalized, &y, &hp, &t.solver)
    });
    let mut fits = fits.into_iter();
    let mut next = || fits.next().expect("three axes");
    let (model_x, sx) = next()?;
    let (model_y, sy) = next()?;
    let (model_z, sz) = next()?;
    let model = PoseModel {
        model_x,
        model_y,
        model_z,
        normalizer,
        grid_side: t.grid_side,
        filter_config: t.filter_config.clone(),
        block_order: BLOCK_ORDER.into(),
        image_width: t.image_width,
        image_height: t.image_height,
    };
    Ok((model, [sx, sy, sz]))
}
