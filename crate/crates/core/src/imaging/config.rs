use crate::error::{Error, Result};

/// Parameters of the filter array. Defaults are the tuned values used for
/// the shipped models.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    /// Side of the Gaussian window for adaptive thresholding (odd, >= 3).
    pub adaptive_block_size: usize,
    /// Offset subtracted from the local weighted mean.
    pub adaptive_c: i32,
    pub adaptive_max_value: u8,
    /// Offset added to the global mean for the binary threshold.
    pub binary_offset: i32,
    pub canny_low: f64,
    pub canny_high: f64,
    /// Sobel aperture (odd, >= 3).
    pub canny_kernel: usize,
    /// Side of the square structuring element (odd).
    pub morph_kernel: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            adaptive_block_size: 57,
            adaptive_c: 2,
            adaptive_max_value: 255,
            binary_offset: 100,
            canny_low: 100.0,
            canny_high: 130.0,
            canny_kernel: 3,
            morph_kernel: 5,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.adaptive_block_size < 3 || self.adaptive_block_size % 2 == 0 {
            return Err(Error::Parameter(format!(
                "adaptive_block_size must be odd and >= 3, got {}",
                self.adaptive_block_size
            )));
        }
        if self.canny_kernel < 3 || self.canny_kernel % 2 == 0 || self.canny_kernel > 7 {
            return Err(Error::Parameter(format!(
                "canny_kernel must be one of 3, 5, 7, got {}",
                self.canny_kernel
            )));
        }
        if !(self.canny_low >= 0.0) || self.canny_high.is_nan() {
            return Err(Error::Parameter("canny thresholds must be non-negative".into()));
        }
        if self.canny_low > self.canny_high {
            return Err(Error::Parameter(format!(
                "canny_low ({}) must not exceed canny_high ({})",
                self.canny_low, self.canny_high
            )));
        }
        if self.morph_kernel == 0 || self.morph_kernel % 2 == 0 {
            return Err(Error::Parameter(format!(
                "morph_kernel must be odd, got {}",
                self.morph_kernel
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        FilterConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_even_block_and_inverted_thresholds() {
        let cfg = FilterConfig {
            adaptive_block_size: 56,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Parameter(_))));
        let cfg = FilterConfig {
            canny_low: 200.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = FilterConfig {
            canny_kernel: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
