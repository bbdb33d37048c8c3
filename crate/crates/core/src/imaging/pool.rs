use super::GrayImage;
use crate::error::{Error, Result};

/// `S x S` grid of region means.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledGrid {
    side: usize,
    values: Vec<f64>,
}

impl PooledGrid {
    pub fn side(&self) -> usize {
        self.side
    }

    /// Row-major region means, `side * side` entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Region boundaries `floor(i * len / side)` for `i = 0..=side`.
pub fn pool_bounds(len: usize, side: usize) -> Vec<usize> {
    (0..=side).map(|i| i * len / side).collect()
}

/// Average pooling over an `side x side` floor-boundary partition.
pub fn average_pool(img: &GrayImage, side: usize) -> Result<PooledGrid> {
    let (w, h) = (img.width(), img.height());
    if side == 0 || side > w || side > h {
        return Err(Error::Parameter(format!(
            "grid side {side} invalid for a {w}x{h} image"
        )));
    }
    let cols = pool_bounds(w, side);
    let rows = pool_bounds(h, side);
    let mut sums = vec![0u64; side * side];
    for i in 0..side {
        for y in rows[i]..rows[i + 1] {
            let row = img.row(y);
            for j in 0..side {
                let s: u32 = row[cols[j]..cols[j + 1]].iter().map(|&v| v as u32).sum();
                sums[i * side + j] += s as u64;
            }
        }
    }
    let values = (0..side * side)
        .map(|r| {
            let (i, j) = (r / side, r % side);
            let area = (rows[i + 1] - rows[i]) * (cols[j + 1] - cols[j]);
            sums[r] as f64 / area as f64
        })
        .collect();
    Ok(PooledGrid { side, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_pools_to_its_value() {
        let g = GrayImage::filled(37, 23, 42);
        for s in 1..=5 {
            let p = average_pool(&g, s).unwrap();
            assert!(p.values().iter().all(|&v| v == 42.0));
        }
    }

    #[test]
    fn global_mean_for_single_region() {
        let g = GrayImage::from_raw(2, 2, vec![0, 255, 255, 0]).unwrap();
        assert_eq!(average_pool(&g, 1).unwrap().values(), &[127.5]);
    }

    #[test]
    fn vga_partition_at_three() {
        let cols = pool_bounds(640, 3);
        let rows = pool_bounds(480, 3);
        let widths: Vec<usize> = cols.windows(2).map(|c| c[1] - c[0]).collect();
        let heights: Vec<usize> = rows.windows(2).map(|c| c[1] - c[0]).collect();
        assert_eq!(widths, vec![213, 213, 214]);
        assert_eq!(heights, vec![160, 160, 160]);
        let area: usize = widths
            .iter()
            .flat_map(|w| heights.iter().map(move |h| w * h))
            .sum();
        assert_eq!(area, 307_200);
    }

    #[test]
    fn bad_side_is_rejected() {
        let g = GrayImage::new(4, 4);
        assert!(average_pool(&g, 0).is_err());
        assert!(average_pool(&g, 5).is_err());
    }
}
