//! Time-of-flight distance sensor baseline.

use super::noise;
use super::plant::PlantState;
use crate::error::{Error, Result};

/// Raw counts per mm of the simulated sensor. Unknown to the calibration.
const RAW_GAIN: f64 = 0.85;
/// Raw reading at zero distance.
const RAW_OFFSET: f64 = 42.0;

/// Raw reading of the distance from the base to the tip, with additive
/// Gaussian noise of `noise_sigma` mm drawn from `seed`.
///
/// The sensor sees `sqrt(x^2 + y^2 + z^2)`, so it cannot separate lateral
/// from axial displacement.
pub fn simulate_tof(s: &PlantState, noise_sigma: f64, seed: u64) -> f64 {
    let dist = (s.x * s.x + s.y * s.y + s.z * s.z).sqrt();
    let n = if noise_sigma > 0.0 {
        noise_sigma * noise::normal(noise::mix64(seed))
    } else {
        0.0
    };
    RAW_GAIN * (dist + n) + RAW_OFFSET
}

/// Ordinary least squares fit of `z ~ gain * raw + offset`.
pub fn calibrate_linear(raw: &[f64], z_gt: &[f64]) -> Result<(f64, f64)> {
    if raw.len() != z_gt.len() {
        return Err(Error::Dimension(format!(
            "{} readings but {} ground-truth values",
            raw.len(),
            z_gt.len()
        )));
    }
    if raw.len() < 2 {
        return Err(Error::Parameter("calibration needs at least 2 points".into()));
    }
    let n = raw.len() as f64;
    let mx = raw.iter().sum::<f64>() / n;
    let my = z_gt.iter().sum::<f64>() / n;
    let sxx: f64 = raw.iter().map(|r| (r - mx) * (r - mx)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
        return Err(Error::Parameter("calibration readings are constant".into()));
    }
    let sxy: f64 = raw.iter().zip(z_gt).map(|(r, z)| (r - mx) * (z - my)).sum();
    let gain = sxy / sxx;
    Ok((gain, my - gain * mx))
}
