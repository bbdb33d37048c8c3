//! Cascaded elongation control: an outer PI position loop with polynomial
//! feedforward produces a pressure setpoint that a faster proportional
//! pressure loop tracks on the simulated plant.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::plantsim::{frame_seed, render_frame, step_plant, Camera, PatternSpec, PlantConfig};
use crate::regression::{AxesMask, PoseModel};

/// Outer position controller settings. Pressures in bar, lengths in mm.
#[derive(Clone, Debug, PartialEq)]
pub struct PiConfig {
    pub kp: f64,
    pub ki: f64,
    /// Bound on the integrator magnitude.
    pub integrator_limit: f64,
    /// `ff(z) = c0 + c1 z + c2 z^2`.
    pub feedforward: [f64; 3],
    /// `(min, max)` pressure setpoint.
    pub output_limits: (f64, f64),
}

impl Default for PiConfig {
    fn default() -> Self {
        let plant = PlantConfig::default();
        Self {
            kp: 2.0e-5,
            ki: 1.2e-4,
            integrator_limit: 0.01,
            feedforward: fit_feedforward(&plant, (20.0, 100.0)),
            output_limits: (0.0, plant.p_max),
        }
    }
}

impl PiConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.output_limits;
        if !(self.kp >= 0.0 && self.ki >= 0.0) {
            return Err(Error::Parameter("controller gains must be >= 0".into()));
        }
        if !(hi > lo) || !(self.integrator_limit > 0.0) {
            return Err(Error::Parameter("controller limits must be positive".into()));
        }
        if self.integrator_limit > hi - lo {
            return Err(Error::Parameter(
                "integrator limit exceeds the output range".into(),
            ));
        }
        if self.feedforward.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("non-finite feedforward coefficient".into()));
        }
        Ok(())
    }

    pub fn feedforward_at(&self, z: f64) -> f64 {
        let [c0, c1, c2] = self.feedforward;
        c0 + z * (c1 + z * c2)
    }
}

/// Least-squares quadratic `z -> p` through the inverse of the plant's
/// static map, sampled uniformly over `range`.
pub fn fit_feedforward(plant: &PlantConfig, range: (f64, f64)) -> [f64; 3] {
    const N: usize = 201;
    // Normal equations on a centred, scaled abscissa for conditioning.
    let mid = 0.5 * (range.0 + range.1);
    let half = (0.5 * (range.1 - range.0)).max(f64::MIN_POSITIVE);
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for i in 0..N {
        let z = range.0 + (range.1 - range.0) * i as f64 / (N - 1) as f64;
        let s = (z - mid) / half;
        let row = [1.0, s, s * s];
        let p = plant.pressure_for(z);
        for r in 0..3 {
            atb[r] += row[r] * p;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let [a0, a1, a2] = solve3(ata, atb);
    // Expand a0 + a1 s + a2 s^2 with s = (z - mid) / half.
    let c2 = a2 / (half * half);
    let c1 = a1 / half - 2.0 * a2 * mid / (half * half);
    let c0 = a0 - a1 * mid / half + a2 * mid * mid / (half * half);
    [c0, c1, c2]
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PiState {
    pub integrator: f64,
}

/// One outer-loop update; returns the pressure setpoint.
///
/// The integrator is frozen while the output is saturated and the error
/// would push it further into saturation.
pub fn pi_step(state: &mut PiState, z_sp: f64, z_meas: f64, dt: f64, cfg: &PiConfig) -> f64 {
    assert!(dt > 0.0);
    let (lo, hi) = cfg.output_limits;
    let e = z_sp - z_meas;
    let base = cfg.feedforward_at(z_sp) + cfg.kp * e;
    let candidate =
        (state.integrator + cfg.ki * e * dt).clamp(-cfg.integrator_limit, cfg.integrator_limit);
    let unsat = base + candidate;
    let winding = (unsat > hi && e > 0.0) || (unsat < lo && e < 0.0);
    if !winding {
        state.integrator = candidate;
    }
    assert!(state.integrator.abs() <= cfg.integrator_limit);
    (base + state.integrator).clamp(lo, hi)
}

/// Default proportional gain of the inner pressure loop.
pub const INNER_GAIN: f64 = 4.0;

/// Inner pressure loop: proportional tracking, never commanding vacuum.
pub fn pressure_step(p_sp: f64, p_meas: f64, kp_inner: f64) -> f64 {
    (p_meas + kp_inner * (p_sp - p_meas)).max(0.0)
}

/// Scheduling of the two loops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopRates {
    pub position_hz: f64,
    pub pressure_hz: f64,
    /// Axes the camera estimator evaluates each outer tick.
    pub sensing: AxesMask,
}

impl Default for LoopRates {
    fn default() -> Self {
        Self {
            position_hz: 50.0,
            pressure_hz: 100.0,
            sensing: AxesMask::Z_ONLY,
        }
    }
}

impl LoopRates {
    /// Number of inner ticks per outer tick.
    pub fn ratio(&self) -> Result<usize> {
        if !(self.position_hz > 0.0 && self.pressure_hz >= self.position_hz) {
            return Err(Error::Parameter(
                "rates must satisfy pressure_hz >= position_hz > 0".into(),
            ));
        }
        let r = self.pressure_hz / self.position_hz;
        if (r - r.round()).abs() > 1e-9 {
            return Err(Error::Parameter(
                "pressure rate must be an integer multiple of the position rate".into(),
            ));
        }
        Ok(r.round() as usize)
    }
}

/// Source of the outer loop's elongation measurement.
#[derive(Clone, Copy, Debug)]
pub enum Feedback<'a> {
    /// Render the current pose and estimate it with a trained model.
    Camera {
        model: &'a PoseModel,
        pattern: &'a PatternSpec,
        camera: &'a Camera,
        seed: u64,
    },
    /// Use the simulated elongation directly.
    GroundTruth,
}

#[derive(Clone, Debug)]
pub struct ClosedLoopConfig {
    pub plant: PlantConfig,
    pub rates: LoopRates,
    pub pi: PiConfig,
    pub inner_gain: f64,
    /// Simulated duration (s).
    pub duration: f64,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            rates: LoopRates::default(),
            pi: PiConfig::default(),
            inner_gain: INNER_GAIN,
            duration: 60.0,
        }
    }
}

/// One logged outer tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub z_sp: f64,
    pub z_cm: f64,
    pub z_gt: f64,
    pub p_sp: f64,
    pub p: f64,
}

/// Closed-loop record sampled at the position rate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "z_sp_mm", "z_cm_mm", "z_gt_mm", "p_sp_bar", "p_bar"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.4}", r.t),
                format!("{:.6}", r.z_sp),
                format!("{:.6}", r.z_cm),
                format!("{:.6}", r.z_gt),
                format!("{:.9}", r.p_sp),
                format!("{:.9}", r.p),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// RMSE between the estimate and the ground truth.
    pub fn sensing_rmse(&self) -> f64 {
        rms(self.rows.iter().map(|r| r.z_cm - r.z_gt))
    }

    /// RMSE between the ground truth and the setpoint.
    pub fn tracking_rmse(&self) -> f64 {
        rms(self.rows.iter().map(|r| r.z_gt - r.z_sp))
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            [r.t, r.z_sp, r.z_cm, r.z_gt, r.p_sp, r.p]
                .iter()
                .all(|v| v.is_finite())
        })
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in it {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Piecewise-constant setpoint schedule of `(t, z_sp)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Setpoints {
    points: Vec<(f64, f64)>,
}

impl Setpoints {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("empty setpoint schedule".into()));
        }
        if points.iter().any(|(t, z)| !t.is_finite() || !z.is_finite()) {
            return Err(Error::Parameter("non-finite setpoint".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Parameter("setpoint times must increase".into()));
        }
        Ok(Self { points })
    }

    /// `levels[i]` held for `hold` seconds each, starting at `t = 0`.
    pub fn staircase(levels: &[f64], hold: f64) -> Result<Self> {
        Self::new(
            levels
                .iter()
                .enumerate()
                .map(|(i, &z)| (i as f64 * hold, z))
                .collect(),
        )
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Setpoint in force at `t`; the first value before the schedule starts.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.points.partition_point(|&(ti, _)| ti <= t);
        self.points[i.saturating_sub(1)].1
    }

    /// Reads a CSV with header `t_s,z_sp_mm`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t_s", "z_sp_mm"] {
            return Err(Error::Format(format!(
                "setpoint header must be t_s,z_sp_mm, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut pts = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Format(format!("setpoint row {}: bad number", i + 1)))
            };
            pts.push((num(0)?, num(1)?));
        }
        Self::new(pts)
    }
}

/// Simulates the cascade in simulation time.
///
/// Every outer tick: (optionally) render and estimate the pose, then update
/// the PI controller. Between outer ticks the pressure loop and plant step
/// exactly `pressure_hz / position_hz` times. The plant starts at rest
/// holding the feedforward pressure of the first setpoint.
pub fn run_closed_loop(
    setpoints: &Setpoints,
    feedback: Feedback<'_>,
    cfg: &ClosedLoopConfig,
) -> Result<TrajectoryLog> {
    cfg.plant.validate()?;
    cfg.pi.validate()?;
    let ratio = cfg.rates.ratio()?;
    if !(cfg.duration > 0.0) || !(cfg.inner_gain >= 0.0) {
        return Err(Error::Parameter("duration and inner gain must be positive".into()));
    }
    if let Feedback::Camera { model, camera, pattern, .. } = feedback {
        model.validate()?;
        pattern.validate()?;
        if camera.width != model.image_width || camera.height != model.image_height {
            return Err(Error::Dimension(format!(
                "camera renders {}x{}, model expects {}x{}",
                camera.width, camera.height, model.image_width, model.image_height
            )));
        }
        if !cfg.rates.sensing.z {
            return Err(Error::Parameter("sensing mask must include z".into()));
        }
    }

    let dt_outer = 1.0 / cfg.rates.position_hz;
    let dt_inner = 1.0 / cfg.rates.pressure_hz;
    let ticks = (cfg.duration * cfg.rates.position_hz).round() as usize;

    let p0 = cfg.pi.feedforward_at(setpoints.at(0.0)).clamp(0.0, cfg.plant.p_max);
    let mut plant = cfg.plant.equilibrium(p0);
    let mut pi = PiState::default();
    let mut log = TrajectoryLog {
        rows: Vec::with_capacity(ticks),
    };
    let mut inner_ticks = 0usize;

    for k in 0..ticks {
        let t = k as f64 * dt_outer;
        let z_sp = setpoints.at(t);
        let z_gt = plant.z;
        let z_cm = match feedback {
            Feedback::GroundTruth => z_gt,
            Feedback::Camera {
                model,
                pattern,
                camera,
                seed,
            } => {
                let frame = render_frame(&plant.pose(), pattern, camera, frame_seed(seed, k))?;
                model
                    .predict_pose(&frame, cfg.rates.sensing)?
                    .z
                    .expect("mask includes z")
            }
        };
        let p_sp = pi_step(&mut pi, z_sp, z_cm, dt_outer, &cfg.pi);
        log.rows.push(LogRow {
            t,
            z_sp,
            z_cm,
            z_gt,
            p_sp,
            p: plant.pressure,
        });
        let before = inner_ticks;
        for _ in 0..ratio {
            let cmd = pressure_step(p_sp, plant.pressure, cfg.inner_gain);
            plant = step_plant(&plant, cmd, dt_inner, &cfg.plant);
            inner_ticks += 1;
        }
        assert_eq!(inner_ticks - before, ratio);
    }
    assert_eq!(inner_ticks, ticks * ratio);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PiConfig {
        PiConfig {
            kp: 0.001,
            ki: 0.01,
            integrator_limit: 0.5,
            feedforward: [0.1, 0.002, 0.0],
            output_limits: (0.0, 1.0),
        }
    }

    #[test]
    fn zero_error_gives_feedforward() {
        let c = cfg();
        let mut s = PiState::default();
        let out = pi_step(&mut s, 20.0, 20.0, 0.02, &c);
        assert!((out - c.feedforward_at(20.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_gains_are_pure_feedforward() {
        let c = PiConfig {
            kp: 0.0,
            ki: 0.0,
            ..cfg()
        };
        let mut s = PiState::default();
        for k in 0..100 {
            let out = pi_step(&mut s, 30.0, k as f64, 0.02, &c);
            assert_eq!(out, c.feedforward_at(30.0));
        }
    }

    #[test]
    fn integrator_ramps_linearly() {
        let c = cfg();
        let mut s = PiState::default();
        let e = 2.0;
        let outs: Vec<f64> = (0..10).map(|_| pi_step(&mut s, 10.0, 10.0 - e, 0.02, &c)).collect();
        for w in outs.windows(2) {
            assert!((w[1] - w[0] - c.ki * e * 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn integrator_respects_clamp_and_freezes_in_saturation() {
        let c = cfg();
        let mut s = PiState::default();
        for _ in 0..10_000 {
            let out = pi_step(&mut s, 1000.0, 0.0, 0.02, &c);
            assert!(s.integrator.abs() <= c.integrator_limit);
            assert_eq!(out, 1.0);
        }
        // Saturated from the start: the integrator never winds up.
        assert_eq!(s.integrator, 0.0);
    }

    #[test]
    fn inner_loop_basics() {
        assert_eq!(pressure_step(0.3, 0.3, 4.0), 0.3);
        assert_eq!(pressure_step(0.0, 0.5, 4.0), 0.0);
    }

    #[test]
    fn inner_loop_is_much_faster_than_outer() {
        let plant = PlantConfig::default();
        let rates = LoopRates::default();
        let dt = 1.0 / rates.pressure_hz;
        let target = 0.01;
        let mut s = plant.equilibrium(0.0);
        let mut settle = None;
        for k in 1..=1000 {
            let cmd = pressure_step(target, s.pressure, INNER_GAIN);
            s = step_plant(&s, cmd, dt, &plant);
            if settle.is_none() && (s.pressure - target).abs() <= 0.05 * target {
                settle = Some(k as f64 * dt);
            }
        }
        let settle = settle.expect("pressure settles");
        assert!(settle < 10.0 / rates.position_hz, "settling {settle}");
        assert!(settle * 5.0 < 1.0 / rates.position_hz * 10.0);
    }

    #[test]
    fn feedforward_fit_is_close_to_map() {
        let plant = PlantConfig::default();
        let ff = fit_feedforward(&plant, (20.0, 100.0));
        let pi = PiConfig {
            feedforward: ff,
            ..PiConfig::default()
        };
        for z in [25.0, 50.0, 90.0] {
            let p = pi.feedforward_at(z);
            assert!((plant.steady_elongation(p) - z).abs() < 10.0, "z {z}");
        }
    }

    #[test]
    fn fits_exact_quadratic() {
        // A map sampled from a quadratic inverse is recovered.
        let map: Vec<(f64, f64)> = (0..=400)
            .map(|i| {
                let z = i as f64 * 0.25;
                (1e-4 + 2e-5 * z + 3e-6 * z * z, z)
            })
            .collect();
        let plant = PlantConfig {
            elongation_map: map,
            ..PlantConfig::default()
        };
        let [c0, c1, c2] = fit_feedforward(&plant, (10.0, 90.0));
        // Only the linear interpolation between knots (~2e-8 bar) separates
        // the fit from the generating quadratic.
        for z in [10.0, 33.3, 71.0, 90.0] {
            let truth = 1e-4 + 2e-5 * z + 3e-6 * z * z;
            assert!((c0 + c1 * z + c2 * z * z - truth).abs() < 5e-8, "z {z}");
        }
    }

    #[test]
    fn ground_truth_hold_at_equilibrium() {
        let cfg = ClosedLoopConfig {
            duration: 20.0,
            ..Default::default()
        };
        let sp = Setpoints::staircase(&[50.0], 20.0).unwrap();
        let log = run_closed_loop(&sp, Feedback::GroundTruth, &cfg).unwrap();
        assert!(log.is_finite());
        let tail = &log.rows[log.rows.len() - 50..];
        assert!(tail.iter().all(|r| (r.z_gt - 50.0).abs() < 0.05));
        assert_eq!(log.rows.len(), 1000);
    }

    #[test]
    fn zero_controller_decays_to_rest() {
        let cfg = ClosedLoopConfig {
            pi: PiConfig {
                kp: 0.0,
                ki: 0.0,
                feedforward: [0.0; 3],
                ..PiConfig::default()
            },
            duration: 10.0,
            ..Default::default()
        };
        let sp = Setpoints::staircase(&[60.0], 10.0).unwrap();
        let log = run_closed_loop(&sp, Feedback::GroundTruth, &cfg).unwrap();
        assert!(log.rows.iter().all(|r| r.p_sp == 0.0));
        assert!(log.rows.last().unwrap().z_gt.abs() < 1e-6);
    }

    #[test]
    fn setpoint_lookup_and_csv() {
        let sp = Setpoints::read_csv("t_s,z_sp_mm\n0,20\n5,40\n".as_bytes()).unwrap();
        assert_eq!(sp.at(-1.0), 20.0);
        assert_eq!(sp.at(4.99), 20.0);
        assert_eq!(sp.at(5.0), 40.0);
        assert!(Setpoints::read_csv("t,z\n0,1\n".as_bytes()).is_err());
        assert!(Setpoints::new(vec![(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn rate_ratio_validation() {
        assert_eq!(LoopRates::default().ratio().unwrap(), 2);
        let bad = LoopRates {
            position_hz: 100.0,
            pressure_hz: 50.0,
            ..LoopRates::default()
        };
        assert!(bad.ratio().is_err());
    }
}
