//! Feature vector assembly: filter array, pooling, concatenation and
//! z-score normalization.

use crate::error::{Error, Result};
use crate::imaging::{
    adaptive_threshold, average_pool, binary_threshold, canny, morph, FilterConfig, GrayImage,
    MorphMode,
};

/// Concatenation order of the pooled blocks: Canny, binary threshold,
/// grayscale, adaptive threshold, erosion, dilation.
pub const BLOCK_ORDER: &str = "C,M,G,A,E,D";

/// Number of filtered images pooled per frame.
pub const NUM_BLOCKS: usize = 6;

/// Pooled intensities of the six filtered images, `6 * side^2` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub grid_side: usize,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Slice of one block, in `BLOCK_ORDER` position `block`.
    pub fn block(&self, block: usize) -> &[f64] {
        let n = self.grid_side * self.grid_side;
        &self.values[block * n..(block + 1) * n]
    }
}

/// Expected feature length for a grid side.
pub const fn feature_len(grid_side: usize) -> usize {
    NUM_BLOCKS * grid_side * grid_side
}

/// The six filtered images in `BLOCK_ORDER`.
pub fn filter_bank(g: &GrayImage, cfg: &FilterConfig) -> Result<[GrayImage; NUM_BLOCKS]> {
    cfg.validate()?;
    let a = adaptive_threshold(g, cfg)?;
    let d = morph(&a, MorphMode::Dilate, cfg);
    let e = morph(&a, MorphMode::Erode, cfg);
    let c = canny(g, cfg)?;
    let m = binary_threshold(g, cfg.binary_offset);
    Ok([c, m, g.clone(), a, e, d])
}

/// Extracts the raw (unnormalized) feature vector of a grayscale frame.
pub fn extract_features(g: &GrayImage, cfg: &FilterConfig, grid_side: usize) -> Result<FeatureVector> {
    if grid_side == 0 || grid_side > g.width() || grid_side > g.height() {
        return Err(Error::Parameter(format!(
            "grid side {grid_side} invalid for a {}x{} image",
            g.width(),
            g.height()
        )));
    }
    let bank = filter_bank(g, cfg)?;
    let mut values = Vec::with_capacity(feature_len(grid_side));
    for img in &bank {
        values.extend_from_slice(average_pool(img, grid_side)?.values());
    }
    Ok(FeatureVector { values, grid_side })
}

/// Extracts features for many frames, in parallel when enabled.
pub fn extract_batch(
    frames: &[GrayImage],
    cfg: &FilterConfig,
    grid_side: usize,
) -> Result<Vec<FeatureVector>> {
    crate::par::map(frames, |g| extract_features(g, cfg, grid_side))
        .into_iter()
        .collect()
}

/// Per-coordinate z-score statistics fitted on a training set.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations below this are replaced by 1.
pub const STD_FLOOR: f64 = 1e-12;

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fits mean and population standard deviation per coordinate.
    pub fn fit<V: AsRef<[f64]>>(samples: &[V]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Parameter(format!(
                "normalizer needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let dim = samples[0].as_ref().len();
        if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != dim) {
            return Err(Error::Dimension(format!(
                "inconsistent feature lengths {dim} and {}",
                bad.as_ref().len()
            )));
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, &v) in mean.iter_mut().zip(s.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((acc, &v), &m) in var.iter_mut().zip(s.as_ref()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd < STD_FLOOR {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        Ok(values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect())
    }

    pub fn denormalize(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        Ok(values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&v, &m), &s)| v * s + m)
            .collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension(format!(
                "feature length {len} does not match normalizer length {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
