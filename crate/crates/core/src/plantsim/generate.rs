//! Smooth random pose trajectories and synthetic datasets.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::noise;
use super::render::{render_frame, Camera, PatternSpec};
use crate::datastore::{Dataset, DatasetMeta, Sample};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Axis-aligned box of reachable poses, mm.
#[derive(Clone, Debug, PartialEq)]
pub struct Workspace {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            x: (-15.0, 15.0),
            y: (-15.0, 15.0),
            z: (0.0, 100.0),
        }
    }
}

impl Workspace {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x", self.x), ("y", self.y), ("z", self.z)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Parameter(format!("workspace {name} range [{lo}, {hi}] is empty")));
            }
        }
        if self.z.0 < 0.0 {
            return Err(Error::Parameter("workspace z must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Pose) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(p.x, self.x) && inside(p.y, self.y) && inside(p.z, self.z)
    }
}

/// Triangle wave with period 2π and range [-1, 1]; uniform occupancy.
fn triangle(u: f64) -> f64 {
    let t = (u / TAU).rem_euclid(1.0);
    if t < 0.5 {
        4.0 * t - 1.0
    } else {
        3.0 - 4.0 * t
    }
}

/// One trajectory coordinate: a triangle sweep whose phase is modulated by a
/// few slow sinusoids. `|triangle| <= 1` bounds the coordinate analytically.
#[derive(Clone, Debug)]
struct Sweep {
    center: f64,
    half_range: f64,
    omega: f64,
    phase: f64,
    modulation: [(f64, f64, f64); 3],
}

impl Sweep {
    fn random(rng: &mut ChaCha8Rng, range: (f64, f64), period: (f64, f64)) -> Self {
        let period = rng.random_range(period.0..period.1);
        let omega = TAU / period;
        let modulation = std::array::from_fn(|_| {
            let depth = rng.random_range(0.3..1.2);
            let freq = omega * rng.random_range(0.13..0.61);
            (depth, freq, rng.random_range(0.0..TAU))
        });
        Self {
            center: 0.5 * (range.0 + range.1),
            half_range: 0.5 * (range.1 - range.0),
            omega,
            phase: rng.random_range(0.0..TAU),
            modulation,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let mut u = self.omega * t + self.phase;
        for &(depth, freq, phase) in &self.modulation {
            u += depth * (freq * t + phase).sin();
        }
        self.center + self.half_range * triangle(u)
    }
}

/// Seeded excitation: slow axial inflation plus faster lateral sweeps.
#[derive(Clone, Debug)]
pub struct Trajectory {
    workspace: Workspace,
    sweeps: [Sweep; 3],
}

impl Trajectory {
    pub fn new(workspace: &Workspace, seed: u64) -> Result<Self> {
        workspace.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Sweep::random(&mut rng, workspace.z, (23.0, 29.0));
        let x = Sweep::random(&mut rng, workspace.x, (3.1, 3.9));
        let y = Sweep::random(&mut rng, workspace.y, (2.3, 2.9));
        Ok(Self {
            workspace: workspace.clone(),
            sweeps: [x, y, z],
        })
    }

    /// Pose at time `t`, quantized to the on-disk grid and clamped to the
    /// workspace.
    pub fn pose(&self, t: f64) -> Pose {
        let ws = &self.workspace;
        let [x, y, z] = &self.sweeps;
        Pose::new(
            x.at(t).clamp(ws.x.0, ws.x.1),
            y.at(t).clamp(ws.y.0, ws.y.1),
            z.at(t).clamp(ws.z.0, ws.z.1),
        )
        .quantized()
    }
}

/// Settings for synthetic data collection.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub workspace: Workspace,
    pub pattern: PatternSpec,
    pub camera: Camera,
    pub rate_hz: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            workspace: Workspace::default(),
            pattern: PatternSpec::default(),
            camera: Camera::default(),
            rate_hz: 10.0,
        }
    }
}

impl GeneratorConfig {
    /// Short digest identifying every generator setting.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{self:?}").as_bytes());
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Noise seed of frame `index` in a dataset generated from `seed`.
pub fn frame_seed(seed: u64, index: usize) -> u64 {
    noise::derive(seed ^ 0xF4A3_E5D1, index as u64)
}

/// Poses and timestamps of an `n`-sample capture at `cfg.rate_hz`.
pub fn sample_poses(n: usize, cfg: &GeneratorConfig, seed: u64) -> Result<Vec<(f64, Pose)>> {
    if !(cfg.rate_hz > 0.0) {
        return Err(Error::Parameter("capture rate must be positive".into()));
    }
    let traj = Trajectory::new(&cfg.workspace, seed)?;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / cfg.rate_hz;
            (t, traj.pose(t))
        })
        .collect())
}

/// Renders the frame of sample `index` at `pose`.
pub fn render_sample(cfg: &GeneratorConfig, pose: &Pose, seed: u64, index: usize) -> Result<crate::imaging::GrayImage> {
    render_frame(pose, &cfg.pattern, &cfg.camera, frame_seed(seed, index))
}

/// Generates `n` rendered samples along a seeded trajectory.
pub fn generate_dataset(n: usize, cfg: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Parameter("dataset size must be at least 1".into()));
    }
    let poses = sample_poses(n, cfg, seed)?;
    let images = crate::par::map_range(n, |i| render_sample(cfg, &poses[i].1, seed, i));
    let samples = images
        .into_iter()
        .zip(poses)
        .map(|(img, (t, pose))| {
            Ok(Sample {
                image: img?,
                pose,
                timestamp: t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            width: cfg.camera.width,
            height: cfg.camera.height,
            rate_hz: cfg.rate_hz,
            seed,
            config_hash: cfg.digest(),
        },
    })
}
