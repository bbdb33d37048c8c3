//! Classical image filters and average pooling.
//!
//! Every windowed filter treats out-of-range pixels by edge replication and
//! uses exact integer arithmetic, so results are reproducible bit for bit.

mod canny;
mod config;
mod gray;
mod morph;
pub mod pnm;
mod pool;
mod raster;
mod threshold;

pub use canny::{canny, sobel_kernels};
pub use config::FilterConfig;
pub use gray::to_grayscale;
pub use morph::{morph, MorphMode};
pub use pool::{average_pool, pool_bounds, PooledGrid};
pub use raster::{GrayImage, RgbImage};
pub use threshold::{adaptive_threshold, binary_threshold, gaussian_weights, quantized_gaussian};

/// Replicates the border: maps a possibly out-of-range coordinate into `0..len`.
#[inline]
pub(crate) fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}
