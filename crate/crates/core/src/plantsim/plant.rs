//! Two-lag actuator model: a fast pressure lag feeding a slower elongation
//! lag through a monotone static map.

use crate::error::{Error, Result};

/// Lateral displacement applied to the actuator tip over time.
#[derive(Clone, Debug, PartialEq)]
pub struct Disturbance {
    /// Time at which lateral motion starts (s).
    pub onset: f64,
    /// Peak lateral displacement per axis (mm).
    pub amplitude: (f64, f64),
    /// Oscillation period per axis (s).
    pub period: (f64, f64),
}

impl Disturbance {
    pub const NONE: Disturbance = Disturbance {
        onset: f64::INFINITY,
        amplitude: (0.0, 0.0),
        period: (1.0, 1.0),
    };

    /// Lateral offset `(x, y)` at time `t`.
    pub fn offset(&self, t: f64) -> (f64, f64) {
        if t < self.onset {
            return (0.0, 0.0);
        }
        let tau = t - self.onset;
        let x = self.amplitude.0 * (std::f64::consts::TAU * tau / self.period.0).sin();
        let y = self.amplitude.1 * (std::f64::consts::TAU * tau / self.period.1).sin();
        (x, y)
    }
}

impl Default for Disturbance {
    fn default() -> Self {
        Self::NONE
    }
}

/// Plant parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantConfig {
    /// Time constant of the pressure response (s).
    pub pressure_time_constant: f64,
    /// Time constant of the elongation response (s).
    pub elongation_time_constant: f64,
    /// Steady-state elongation as a strictly increasing table of
    /// `(pressure bar, elongation mm)`; linear in between, flat outside.
    pub elongation_map: Vec<(f64, f64)>,
    pub z_max: f64,
    /// Largest pressure the supply can deliver (bar above ambient).
    pub p_max: f64,
    pub disturbance: Disturbance,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            pressure_time_constant: 0.05,
            elongation_time_constant: 0.4,
            elongation_map: vec![
                (0.0, 0.0),
                (0.0005, 15.0),
                (0.001, 30.0),
                (0.002, 50.0),
                (0.004, 72.0),
                (0.007, 90.0),
                (0.012, 104.0),
                (0.02, 112.0),
            ],
            z_max: 115.0,
            p_max: 0.025,
            disturbance: Disturbance::NONE,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_time_constant > 0.0) || !(self.elongation_time_constant > 0.0) {
            return Err(Error::Parameter("time constants must be positive".into()));
        }
        if self.elongation_map.len() < 2
            || self
                .elongation_map
                .windows(2)
                .any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1))
        {
            return Err(Error::Parameter(
                "elongation map must be strictly increasing with >= 2 points".into(),
            ));
        }
        if !(self.p_max > 0.0) || !(self.z_max > 0.0) {
            return Err(Error::Parameter("p_max and z_max must be positive".into()));
        }
        Ok(())
    }

    /// Steady-state elongation for a held pressure.
    pub fn steady_elongation(&self, pressure: f64) -> f64 {
        let map = &self.elongation_map;
        let (first, last) = (map[0], map[map.len() - 1]);
        let z = if pressure <= first.0 {
            first.1
        } else if pressure >= last.0 {
            last.1
        } else {
            let i = map.partition_point(|&(p, _)| p <= pressure);
            let (p0, z0) = map[i - 1];
            let (p1, z1) = map[i];
            z0 + (z1 - z0) * (pressure - p0) / (p1 - p0)
        };
        z.min(self.z_max)
    }

    /// Pressure whose steady-state elongation is `z` (clamped to the map).
    pub fn pressure_for(&self, z: f64) -> f64 {
        let map = &self.elongation_map;
        let (first, last) = (map[0], map[map.len() - 1]);
        if z <= first.1 {
            return first.0;
        }
        if z >= last.1 {
            return last.0;
        }
        let i = map.partition_point(|&(_, zz)| zz <= z);
        let (p0, z0) = map[i - 1];
        let (p1, z1) = map[i];
        p0 + (p1 - p0) * (z - z0) / (z1 - z0)
    }

    /// State at rest with a held pressure.
    pub fn equilibrium(&self, pressure: f64) -> PlantState {
        let (x, y) = self.disturbance.offset(0.0);
        PlantState {
            pressure,
            z: self.steady_elongation(pressure),
            x,
            y,
            time: 0.0,
        }
    }
}

/// Simulated actuator state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantState {
    /// Internal pressure, bar above ambient.
    pub pressure: f64,
    /// Elongation (mm).
    pub z: f64,
    pub x: f64,
    pub y: f64,
    pub time: f64,
}

impl PlantState {
    pub fn pose(&self) -> crate::pose::Pose {
        crate::pose::Pose::new(self.x, self.y, self.z)
    }
}

/// Advances the plant by `dt` under a held pressure command.
///
/// Pressure relaxes exactly (zero-order hold) toward the clamped command;
/// elongation relaxes toward the static map evaluated at the pressure at the
/// start of the step, which makes the scheme first-order accurate in `dt`.
pub fn step_plant(s: &PlantState, p_command: f64, dt: f64, cfg: &PlantConfig) -> PlantState {
    assert!(dt > 0.0);
    let cmd = p_command.clamp(0.0, cfg.p_max);
    let decay_p = (-dt / cfg.pressure_time_constant).exp();
    let pressure = cmd + (s.pressure - cmd) * decay_p;
    let target = cfg.steady_elongation(s.pressure);
    let decay_z = (-dt / cfg.elongation_time_constant).exp();
    let z = (target + (s.z - target) * decay_z).clamp(0.0, cfg.z_max);
    let time = s.time + dt;
    let (x, y) = cfg.disturbance.offset(time);
    PlantState {
        pressure,
        z,
        x,
        y,
        time,
    }
}
