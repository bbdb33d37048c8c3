use super::{clamp_index, FilterConfig, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphMode {
    Dilate,
    Erode,
}

/// Dilation (local max) or erosion (local min) with a square structuring
/// element of side `cfg.morph_kernel`, computed as two 1-D passes.
pub fn morph(a: &GrayImage, mode: MorphMode, cfg: &FilterConfig) -> GrayImage {
    match mode {
        MorphMode::Dilate => morph_with(a, cfg.morph_kernel, u8::max),
        MorphMode::Erode => morph_with(a, cfg.morph_kernel, u8::min),
    }
}

#[inline(always)]
fn morph_with(a: &GrayImage, k: usize, pick: impl Fn(u8, u8) -> u8 + Copy) -> GrayImage {
    let k = k.max(1);
    let half = (k / 2) as isize;
    let (w, h) = (a.width(), a.height());
    if w == 0 || h == 0 {
        return a.clone();
    }

    let mut rows = vec![0u8; w * h];
    let mut padded = vec![0u8; w + 2 * half as usize];
    for y in 0..h {
        let src = a.row(y);
        for (i, p) in padded.iter_mut().enumerate() {
            *p = src[clamp_index(i as isize - half, w)];
        }
        let dst = &mut rows[y * w..(y + 1) * w];
        dst.copy_from_slice(&padded[..w]);
        for t in 1..k {
            for (d, &v) in dst.iter_mut().zip(&padded[t..t + w]) {
                *d = pick(*d, v);
            }
        }
    }

    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        let first = clamp_index(y as isize - half, h);
        dst.copy_from_slice(&rows[first * w..(first + 1) * w]);
        for t in 1..k as isize {
            let sy = clamp_index(y as isize - half + t, h);
            for (d, &v) in dst.iter_mut().zip(&rows[sy * w..(sy + 1) * w]) {
                *d = pick(*d, v);
            }
        }
    }
    GrayImage::from_raw(w, h, out).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_image_is_fixed() {
        let z = GrayImage::new(12, 9);
        let cfg = FilterConfig::default();
        assert_eq!(morph(&z, MorphMode::Dilate, &cfg), z);
        assert_eq!(morph(&z, MorphMode::Erode, &cfg), z);
    }

    #[test]
    fn dilating_a_point_stamps_the_element() {
        let mut g = GrayImage::new(15, 15);
        g.set(7, 7, 255);
        let d = morph(&g, MorphMode::Dilate, &FilterConfig::default());
        for y in 0..15 {
            for x in 0..15 {
                let inside = (5..=9).contains(&x) && (5..=9).contains(&y);
                assert_eq!(d.get(x, y), if inside { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn closing_contains_original() {
        let g = GrayImage::from_fn(20, 20, |x, y| if (x * 7 + y * 3) % 11 < 3 { 255 } else { 0 });
        let cfg = FilterConfig::default();
        let closed = morph(&morph(&g, MorphMode::Dilate, &cfg), MorphMode::Erode, &cfg);
        for (c, o) in closed.data().iter().zip(g.data()) {
            assert!(c >= o);
        }
    }
}
