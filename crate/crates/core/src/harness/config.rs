//! Flat `key=value` run configuration shared by every subcommand.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::control::{ClosedLoopConfig, LoopRates, Setpoints};
use crate::datastore::{parse_key_values, write_key_values};
use crate::error::{Error, Result};
use crate::imaging::FilterConfig;
use crate::plantsim::{Camera, Disturbance, GeneratorConfig, PatternSpec, PlantConfig, Workspace};
use crate::regression::{default_grid, AxesMask, SolverOptions, SvrHyperparams, DEFAULT_HYPERPARAMS};

/// File name of the resolved-config echo written next to every output.
pub const CONFIG_ECHO: &str = "config.txt";

/// Every tunable of the command-line tools. Defaults give the full-scale
/// setup; [`RunConfig::ci`] is the reduced profile.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub profile: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub train_n: usize,
    pub test_n: usize,
    pub rate_hz: f64,
    pub workspace: Workspace,
    pub noise_sigma: f64,
    pub lighting_knee: f64,
    pub grid_side: usize,
    pub folds: usize,
    /// Per-axis (x, y, z) hyperparameters for fixed-mode training.
    pub svr: [SvrHyperparams; 3],
    pub grid_epsilon: Vec<f64>,
    pub grid_cost: Vec<f64>,
    pub grid_gamma: Vec<f64>,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub bench_frames: usize,
    pub bench_axes: AxesMask,
    pub tof_noise: f64,
    pub tof_rate_hz: f64,
    pub tof_duration: f64,
    pub disturbance_amplitude: (f64, f64),
    pub disturbance_period: (f64, f64),
    pub sim_levels: Vec<f64>,
    pub sim_hold: f64,
    pub sim_position_hz: f64,
    pub sim_pressure_hz: f64,
    pub sim_axes: AxesMask,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = default_grid();
        let mut eps: Vec<f64> = grid.iter().map(|h| h.epsilon).collect();
        let mut cost: Vec<f64> = grid.iter().map(|h| h.cost).collect();
        let mut gamma: Vec<f64> = grid.iter().map(|h| h.gamma).collect();
        for v in [&mut eps, &mut cost, &mut gamma] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        Self {
            profile: "default".into(),
            seed: 1,
            width: 640,
            height: 480,
            train_n: 9000,
            test_n: 500,
            rate_hz: 10.0,
            workspace: Workspace::default(),
            noise_sigma: 2.0,
            lighting_knee: 20.0,
            grid_side: 3,
            folds: 5,
            svr: DEFAULT_HYPERPARAMS,
            grid_epsilon: eps,
            grid_cost: cost,
            grid_gamma: gamma,
            solver_tol: SolverOptions::default().tol,
            solver_max_iter: SolverOptions::default().max_iter,
            bench_frames: 1000,
            bench_axes: AxesMask::ALL,
            tof_noise: 0.5,
            tof_rate_hz: 50.0,
            tof_duration: 60.0,
            disturbance_amplitude: (12.0, 12.0),
            disturbance_period: (5.3, 3.7),
            sim_levels: vec![30.0, 50.0, 70.0, 90.0, 60.0, 40.0],
            sim_hold: 10.0,
            sim_position_hz: 50.0,
            sim_pressure_hz: 100.0,
            sim_axes: AxesMask::Z_ONLY,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| Error::Parameter(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse(key, t.trim())).collect()
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list(key, v)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Parameter(format!("{key}: expected two comma-separated values"))),
    }
}

fn parse_hp(key: &str, v: &str) -> Result<SvrHyperparams> {
    match parse_list(key, v)?[..] {
        [e, k, g] => Ok(SvrHyperparams::new(e, k, g)),
        _ => Err(Error::Parameter(format!("{key}: expected epsilon,cost,gamma"))),
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn pair((a, b): (f64, f64)) -> String {
    format!("{a},{b}")
}

impl RunConfig {
    /// Reduced-resolution profile for quick end-to-end runs.
    pub fn ci() -> Self {
        Self {
            profile: "ci".into(),
            width: 160,
            height: 120,
            train_n: 500,
            test_n: 100,
            bench_frames: 1000,
            ..Self::default()
        }
    }

    pub fn named(profile: &str) -> Result<Self> {
        match profile {
            "default" => Ok(Self::default()),
            "ci" => Ok(Self::ci()),
            other => Err(Error::Parameter(format!("unknown profile {other:?} (expected default or ci)"))),
        }
    }

    /// Parses a config file body. A `profile` key selects the base profile;
    /// every other key overrides it. Unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let profile = kv
            .iter()
            .find(|(k, _)| k == "profile")
            .map_or("default", |(_, v)| v.as_str());
        let mut cfg = Self::named(profile)?;
        for (k, v) in &kv {
            if k != "profile" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "profile" => *self = Self { profile: v.into(), ..Self::named(v)? },
            "seed" => self.seed = parse(key, v)?,
            "width" => self.width = parse(key, v)?,
            "height" => self.height = parse(key, v)?,
            "train.n" => self.train_n = parse(key, v)?,
            "test.n" => self.test_n = parse(key, v)?,
            "rate_hz" => self.rate_hz = parse(key, v)?,
            "workspace.x" => self.workspace.x = parse_pair(key, v)?,
            "workspace.y" => self.workspace.y = parse_pair(key, v)?,
            "workspace.z" => self.workspace.z = parse_pair(key, v)?,
            "noise_sigma" => self.noise_sigma = parse(key, v)?,
            "lighting_knee" => self.lighting_knee = parse(key, v)?,
            "grid_side" => self.grid_side = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "svr.x" => self.svr[0] = parse_hp(key, v)?,
            "svr.y" => self.svr[1] = parse_hp(key, v)?,
            "svr.z" => self.svr[2] = parse_hp(key, v)?,
            "grid.epsilon" => self.grid_epsilon = parse_list(key, v)?,
            "grid.cost" => self.grid_cost = parse_list(key, v)?,
            "grid.gamma" => self.grid_gamma = parse_list(key, v)?,
            "solver.tol" => self.solver_tol = parse(key, v)?,
            "solver.max_iter" => self.solver_max_iter = parse(key, v)?,
            "bench.frames" => self.bench_frames = parse(key, v)?,
            "bench.axes" => self.bench_axes = AxesMask::parse(v)?,
            "tof.noise" => self.tof_noise = parse(key, v)?,
            "tof.rate_hz" => self.tof_rate_hz = parse(key, v)?,
            "tof.duration" => self.tof_duration = parse(key, v)?,
            "disturbance.amplitude" => self.disturbance_amplitude = parse_pair(key, v)?,
            "disturbance.period" => self.disturbance_period = parse_pair(key, v)?,
            "sim.levels" => self.sim_levels = parse_list(key, v)?,
            "sim.hold" => self.sim_hold = parse(key, v)?,
            "sim.position_hz" => self.sim_position_hz = parse(key, v)?,
            "sim.pressure_hz" => self.sim_pressure_hz = parse(key, v)?,
            "sim.axes" => self.sim_axes = AxesMask::parse(v)?,
            _ => return Err(Error::Parameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its resolved value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("profile", self.profile.clone()),
            ("seed", self.seed.to_string()),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("train.n", self.train_n.to_string()),
            ("test.n", self.test_n.to_string()),
            ("rate_hz", self.rate_hz.to_string()),
            ("workspace.x", pair(self.workspace.x)),
            ("workspace.y", pair(self.workspace.y)),
            ("workspace.z", pair(self.workspace.z)),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("lighting_knee", self.lighting_knee.to_string()),
            ("grid_side", self.grid_side.to_string()),
            ("folds", self.folds.to_string()),
            ("svr.x", hp(&self.svr[0])),
            ("svr.y", hp(&self.svr[1])),
            ("svr.z", hp(&self.svr[2])),
            ("grid.epsilon", list(&self.grid_epsilon)),
            ("grid.cost", list(&self.grid_cost)),
            ("grid.gamma", list(&self.grid_gamma)),
            ("solver.tol", self.solver_tol.to_string()),
            ("solver.max_iter", self.solver_max_iter.to_string()),
            ("bench.frames", self.bench_frames.to_string()),
            ("bench.axes", self.bench_axes.to_string()),
            ("tof.noise", self.tof_noise.to_string()),
            ("tof.rate_hz", self.tof_rate_hz.to_string()),
            ("tof.duration", self.tof_duration.to_string()),
            ("disturbance.amplitude", pair(self.disturbance_amplitude)),
            ("disturbance.period", pair(self.disturbance_period)),
            ("sim.levels", list(&self.sim_levels)),
            ("sim.hold", self.sim_hold.to_string()),
            ("sim.position_hz", self.sim_position_hz.to_string()),
            ("sim.pressure_hz", self.sim_pressure_hz.to_string()),
            ("sim.axes", self.sim_axes.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        write_key_values(self.entries())
    }

    /// Writes the resolved configuration into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_ECHO), self.to_text())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Parameter(msg.into()));
        if self.width < 8 || self.height < 8 {
            return bad("image must be at least 8x8");
        }
        if self.train_n == 0 || self.test_n == 0 {
            return bad("dataset sizes must be at least 1");
        }
        if !(self.rate_hz > 0.0) {
            return bad("rate_hz must be positive");
        }
        self.workspace.validate()?;
        if !(self.noise_sigma >= 0.0) || !(self.lighting_knee >= 0.0) {
            return bad("noise_sigma and lighting_knee must be non-negative");
        }
        if self.grid_side == 0 || self.grid_side > self.width.min(self.height) {
            return bad("grid_side must lie in [1, min(width, height)]");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        for h in &self.svr {
            h.validate()?;
        }
        if self.grid_epsilon.is_empty() || self.grid_cost.is_empty() || self.grid_gamma.is_empty() {
            return bad("grid lists must not be empty");
        }
        for h in self.grid() {
            h.validate()?;
        }
        if !(self.solver_tol > 0.0) || self.solver_max_iter == 0 {
            return bad("solver tolerance and iteration limit must be positive");
        }
        if self.bench_frames == 0 {
            return bad("bench.frames must be at least 1");
        }
        if !(self.tof_noise >= 0.0) || !(self.tof_rate_hz > 0.0) || !(self.tof_duration > 0.0) {
            return bad("tof settings must be positive");
        }
        let (px, py) = self.disturbance_period;
        if !(px > 0.0 && py > 0.0) {
            return bad("disturbance periods must be positive");
        }
        if self.sim_levels.is_empty() || !(self.sim_hold > 1.0) {
            return bad("sim.levels must be non-empty and sim.hold longer than 1 s");
        }
        if self.sim_levels.iter().any(|z| !z.is_finite() || *z < 0.0) {
            return bad("sim.levels must be finite and non-negative");
        }
        self.loop_rates().ratio()?;
        Ok(())
    }

    /// Cartesian product of the grid lists.
    pub fn grid(&self) -> Vec<SvrHyperparams> {
        let mut out = Vec::new();
        for &e in &self.grid_epsilon {
            for &k in &self.grid_cost {
                for &g in &self.grid_gamma {
                    out.push(SvrHyperparams::new(e, k, g));
                }
            }
        }
        out
    }

    pub fn camera(&self) -> Camera {
        Camera {
            noise_sigma: self.noise_sigma,
            lighting_knee: self.lighting_knee,
            ..Camera::new(self.width, self.height)
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            workspace: self.workspace.clone(),
            pattern: PatternSpec::default(),
            camera: self.camera(),
            rate_hz: self.rate_hz,
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig::default()
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            max_iter: self.solver_max_iter,
            ..SolverOptions::default()
        }
    }

    /// Lateral disturbance switched on at `onset` seconds.
    pub fn disturbance(&self, onset: f64) -> Disturbance {
        Disturbance {
            onset,
            amplitude: self.disturbance_amplitude,
            period: self.disturbance_period,
        }
    }

    pub fn loop_rates(&self) -> LoopRates {
        LoopRates {
            position_hz: self.sim_position_hz,
            pressure_hz: self.sim_pressure_hz,
            sensing: self.sim_axes,
        }
    }

    pub fn setpoints(&self) -> Result<Setpoints> {
        Setpoints::staircase(&self.sim_levels, self.sim_hold)
    }

    pub fn closed_loop(&self) -> ClosedLoopConfig {
        ClosedLoopConfig {
            plant: PlantConfig::default(),
            rates: self.loop_rates(),
            duration: self.sim_levels.len() as f64 * self.sim_hold,
            ..ClosedLoopConfig::default()
        }
    }
}

fn hp(h: &SvrHyperparams) -> String {
    format!("{},{},{}", h.epsilon, h.cost, h.gamma)
}
