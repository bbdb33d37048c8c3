use super::{GrayImage, RgbImage};

/// BT.601 luma, rounded half up: `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(rgb: &RgbImage) -> GrayImage {
    let data = rgb
        .data()
        .chunks_exact(3)
        .map(|p| {
            let n = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((n + 500) / 1000) as u8
        })
        .collect();
    GrayImage::from_raw(rgb.width(), rgb.height(), data).expect("rgb buffer already validated")
}
