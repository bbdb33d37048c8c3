use super::{clamp_index, FilterConfig, GrayImage};
use crate::error::{Error, Result};

/// Fixed-point scale of the quantized Gaussian window.
const WEIGHT_SCALE: f64 = 2048.0;

/// Normalized 1-D Gaussian window of odd length `size`, with
/// `sigma = 0.3 * ((size - 1) / 2 - 1) + 0.8`.
pub fn gaussian_weights(size: usize) -> Vec<f64> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let center = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// The Gaussian window rounded to integers summing to roughly 2048.
///
/// The 2-D window is the outer product of this vector with itself; the local
/// mean is its weighted sum divided by `(sum of weights)^2`.
pub fn quantized_gaussian(size: usize) -> Vec<u32> {
    gaussian_weights(size)
        .into_iter()
        .map(|w| (w * WEIGHT_SCALE).round() as u32)
        .collect()
}

/// Adaptive Gaussian thresholding.
///
/// A pixel becomes `max_value` when it is strictly brighter than the
/// Gaussian-weighted mean of its `block_size` neighbourhood minus `c`.
pub fn adaptive_threshold(g: &GrayImage, cfg: &FilterConfig) -> Result<GrayImage> {
    let size = cfg.adaptive_block_size;
    if size < 3 || size % 2 == 0 {
        return Err(Error::Parameter(format!(
            "adaptive block size must be odd and >= 3, got {size}"
        )));
    }
    let (w, h) = (g.width(), g.height());
    if w == 0 || h == 0 {
        return Ok(g.clone());
    }
    let q = quantized_gaussian(size);
    let total: u64 = q.iter().map(|&v| v as u64).sum();
    let total_sq = (total * total) as i64;

    let max_value = cfg.adaptive_max_value;
    let c = cfg.adaptive_c as i64;
    // v > a / total^2 - c  <=>  a < (v + c) * total^2
    let mut bound = [0i64; 256];
    for (v, slot) in bound.iter_mut().enumerate() {
        *slot = (v as i64 + c) * total_sq;
    }
    let mut sums = LocalSums::new(q, w);
    let mut row_sums = vec![0u32; w];
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        sums.row(g, y, &mut row_sums);
        let dst = &mut out[y * w..(y + 1) * w];
        for ((d, &a), &v) in dst.iter_mut().zip(&row_sums).zip(g.row(y)) {
            *d = if (a as i64) < bound[v as usize] {
                max_value
            } else {
                0
            };
        }
    }
    GrayImage::from_raw(w, h, out)
}

/// Gaussian-weighted (unnormalized) window sums, one output row at a time:
/// a vertical pass over the 8-bit rows followed by a horizontal pass.
struct LocalSums {
    q: Vec<u32>,
    half: usize,
    /// Vertical sums with `half` replicated entries on each side.
    vert: Vec<u32>,
    /// Scratch for the split 16-bit horizontal pass.
    hi: Vec<i16>,
    lo: Vec<i16>,
    simd: bool,
}

impl LocalSums {
    fn new(q: Vec<u32>, w: usize) -> Self {
        let half = q.len() / 2;
        let total: u64 = q.iter().map(|&v| v as u64).sum();
        // Vertical sums below 2^20 and totals below 2^31 keep every
        // intermediate of the 16-bit multiply-add path in range.
        let simd = cfg!(target_arch = "x86_64") && 255 * total < 1 << 20 && 255 * total * total < 1 << 31;
        Self {
            q,
            half,
            vert: vec![0; w + 2 * half],
            hi: vec![0; w + 2 * half],
            lo: vec![0; w + 2 * half],
            simd,
        }
    }

    fn row(&mut self, g: &GrayImage, y: usize, out: &mut [u32]) {
        let (w, h, half) = (g.width(), g.height(), self.half);
        let pick = |d: isize| g.row(clamp_index(y as isize + d, h));
        let center = g.row(y);
        let pairs: Vec<(&[u8], &[u8])> = (0..half)
            .map(|j| (pick(j as isize - half as isize), pick(half as isize - j as isize)))
            .collect();
        let core = &mut self.vert[half..half + w];
        #[cfg(target_arch = "x86_64")]
        let done = if self.simd {
            // SAFETY: SSE2 is part of the x86_64 baseline.
            unsafe { sse2::vertical(center, &pairs, &self.q, core) }
        } else {
            0
        };
        #[cfg(not(target_arch = "x86_64"))]
        let done = 0;
        vertical_scalar(center, &pairs, &self.q, core, done);
        for i in 0..half {
            self.vert[i] = self.vert[half];
            self.vert[half + w + i] = self.vert[half + w - 1];
        }
        #[cfg(target_arch = "x86_64")]
        let done = if self.simd {
            // SAFETY: as above.
            unsafe { sse2::horizontal(&self.vert, &self.q, out, &mut self.hi, &mut self.lo) }
        } else {
            0
        };
        #[cfg(not(target_arch = "x86_64"))]
        let done = 0;
        horizontal_scalar(&self.vert, &self.q, out, done);
    }
}

/// `core[x] = q[half] * center[x] + sum_j q[j] * (top_j[x] + bottom_j[x])`
/// for `x >= from`.
fn vertical_scalar(center: &[u8], pairs: &[(&[u8], &[u8])], q: &[u32], core: &mut [u32], from: usize) {
    let half = pairs.len();
    let wt = q[half];
    for (a, &m) in core[from..].iter_mut().zip(&center[from..]) {
        *a = wt * m as u32;
    }
    for (j, (top, bottom)) in pairs.iter().enumerate() {
        let wt = q[j];
        for ((a, &t), &b) in core[from..].iter_mut().zip(&top[from..]).zip(&bottom[from..]) {
            *a += wt * (t as u32 + b as u32);
        }
    }
}

/// `out[x] = sum_i q[i] * padded[x + i]` for a symmetric kernel `q` and
/// `x >= from`.
fn horizontal_scalar(padded: &[u32], q: &[u32], out: &mut [u32], from: usize) {
    let size = q.len();
    let half = size / 2;
    let n = out.len();
    let wt = q[half];
    for (o, &m) in out[from..].iter_mut().zip(&padded[half + from..half + n]) {
        *o = wt * m;
    }
    for i in 0..half {
        let wt = q[i];
        let left = &padded[i + from..i + n];
        let right = &padded[size - 1 - i + from..size - 1 - i + n];
        for ((o, &l), &r) in out[from..].iter_mut().zip(left).zip(right) {
            *o += wt * (l + r);
        }
    }
}

/// 16-bit multiply-add (`pmaddwd`) versions of the two passes. Each handles
/// the largest multiple of 8 pixels and returns how many it wrote.
#[cfg(target_arch = "x86_64")]
mod sse2 {
    use std::arch::x86_64::*;

    // Callers check slice lengths once per call, so the per-load helpers
    // stay unchecked even in debug builds.
    #[inline(always)]
    unsafe fn load8_u8(p: &[u8], x: usize) -> __m128i {
        _mm_unpacklo_epi8(_mm_loadl_epi64(p.as_ptr().wrapping_add(x) as *const __m128i), _mm_setzero_si128())
    }

    #[inline(always)]
    unsafe fn load8_i16(p: &[i16], x: usize) -> __m128i {
        _mm_loadu_si128(p.as_ptr().wrapping_add(x) as *const __m128i)
    }

    #[inline(always)]
    fn pair_weights(a: u32, b: u32) -> __m128i {
        // SAFETY: plain register construction.
        unsafe { _mm_set1_epi32(((b << 16) | a) as i32) }
    }

    /// Accumulates `wa * sa + wb * sb` (8 lanes of i16) into two i32x4.
    #[inline(always)]
    unsafe fn madd_pair(acc: &mut [__m128i; 2], sa: __m128i, sb: __m128i, w: __m128i) {
        acc[0] = _mm_add_epi32(acc[0], _mm_madd_epi16(_mm_unpacklo_epi16(sa, sb), w));
        acc[1] = _mm_add_epi32(acc[1], _mm_madd_epi16(_mm_unpackhi_epi16(sa, sb), w));
    }

    #[inline(always)]
    unsafe fn store(out: &mut [u32], x: usize, acc: [__m128i; 2]) {
        let p = out.as_mut_ptr().wrapping_add(x) as *mut __m128i;
        _mm_storeu_si128(p, acc[0]);
        _mm_storeu_si128(p.wrapping_add(1), acc[1]);
    }

    /// Pairs `(j, j + 1)` of regular terms, then the leftover regular term
    /// (if any) with the centre term, or the centre term alone.
    fn schedule(q: &[u32], half: usize) -> (Vec<__m128i>, __m128i, bool) {
        let full: Vec<__m128i> = (0..half / 2).map(|k| pair_weights(q[2 * k], q[2 * k + 1])).collect();
        let odd = half % 2 == 1;
        let tail = if odd {
            pair_weights(q[half - 1], q[half])
        } else {
            pair_weights(q[half], 0)
        };
        (full, tail, odd)
    }

    pub(super) unsafe fn vertical(
        center: &[u8],
        pairs: &[(&[u8], &[u8])],
        q: &[u32],
        core: &mut [u32],
    ) -> usize {
        let n = core.len() / 8 * 8;
        let half = pairs.len();
        assert!(center.len() >= n && pairs.iter().all(|(t, b)| t.len() >= n && b.len() >= n));
        assert!(q.len() == 2 * half + 1);
        let term = |j: usize, x: usize| -> __m128i {
            let (t, b) = pairs[j];
            _mm_add_epi16(load8_u8(t, x), load8_u8(b, x))
        };
        let (full, tail, odd) = schedule(q, half);
        for x in (0..n).step_by(8) {
            let mut acc = [_mm_setzero_si128(); 2];
            for (k, &w) in full.iter().enumerate() {
                madd_pair(&mut acc, term(2 * k, x), term(2 * k + 1, x), w);
            }
            let c = load8_u8(center, x);
            if odd {
                madd_pair(&mut acc, term(half - 1, x), c, tail);
            } else {
                madd_pair(&mut acc, c, _mm_setzero_si128(), tail);
            }
            store(core, x, acc);
        }
        n
    }

    /// `hi`/`lo` are scratch rows of the padded length.
    pub(super) unsafe fn horizontal(
        padded: &[u32],
        q: &[u32],
        out: &mut [u32],
        hi: &mut [i16],
        lo: &mut [i16],
    ) -> usize {
        let n = out.len() / 8 * 8;
        let size = q.len();
        let half = size / 2;
        // Highest load index is n - 8 + size - 1, eight lanes wide.
        assert!(hi.len() == padded.len() && lo.len() == padded.len() && padded.len() + 1 >= n + size);
        // Split each sum into 9 low bits and the rest so both halves and
        // their pairwise sums fit in i16.
        for ((h, l), &v) in hi.iter_mut().zip(lo.iter_mut()).zip(padded) {
            *h = (v >> 9) as i16;
            *l = (v & 511) as i16;
        }
        let (hi, lo) = (&*hi, &*lo);
        let term = |p: &[i16], i: usize, x: usize| -> __m128i {
            _mm_add_epi16(load8_i16(p, x + i), load8_i16(p, x + size - 1 - i))
        };
        let (full, tail, odd) = schedule(q, half);
        for x in (0..n).step_by(8) {
            let mut acc_hi = [_mm_setzero_si128(); 2];
            let mut acc_lo = [_mm_setzero_si128(); 2];
            for (k, &w) in full.iter().enumerate() {
                let i = 2 * k;
                madd_pair(&mut acc_hi, term(hi, i, x), term(hi, i + 1, x), w);
                madd_pair(&mut acc_lo, term(lo, i, x), term(lo, i + 1, x), w);
            }
            let (ch, cl) = (load8_i16(hi, x + half), load8_i16(lo, x + half));
            if odd {
                madd_pair(&mut acc_hi, term(hi, half - 1, x), ch, tail);
                madd_pair(&mut acc_lo, term(lo, half - 1, x), cl, tail);
            } else {
                let zero = _mm_setzero_si128();
                madd_pair(&mut acc_hi, ch, zero, tail);
                madd_pair(&mut acc_lo, cl, zero, tail);
            }
            let combine = |h: __m128i, l: __m128i| _mm_add_epi32(_mm_slli_epi32(h, 9), l);
            store(out, x, [combine(acc_hi[0], acc_lo[0]), combine(acc_hi[1], acc_lo[1])]);
        }
        n
    }
}

/// Global binary threshold at `mean(g) + offset`; pixels strictly above it
/// become 255, all others 0.
pub fn binary_threshold(g: &GrayImage, offset: i32) -> GrayImage {
    let n = g.len() as i64;
    let sum: i64 = g.data().iter().map(|&v| v as i64).sum();
    // v > sum / n + offset  <=>  v * n > sum + offset * n
    let bound = sum + offset as i64 * n;
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        if v as i64 * n > bound {
            *slot = 255;
        }
    }
    let data = g.data().iter().map(|&v| lut[v as usize]).collect();
    GrayImage::from_raw(g.width(), g.height(), data).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_with_c(c: i32) -> FilterConfig {
        FilterConfig {
            adaptive_c: c,
            ..Default::default()
        }
    }

    #[test]
    fn gaussian_window_is_normalized_and_symmetric() {
        let w = gaussian_weights(57);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..57 {
            assert_eq!(w[i], w[56 - i]);
        }
        let q = quantized_gaussian(57);
        let total: u32 = q.iter().sum();
        assert!((2000..2100).contains(&total));
    }

    #[test]
    fn constant_image_exceeds_its_own_mean_minus_c() {
        let g = GrayImage::filled(40, 30, 128);
        let a = adaptive_threshold(&g, &FilterConfig::default()).unwrap();
        assert!(a.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn zero_offset_constant_image_is_all_zero() {
        let g = GrayImage::filled(16, 16, 77);
        let a = adaptive_threshold(&g, &cfg_with_c(0)).unwrap();
        assert!(a.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn single_white_pixel_survives_far_field_stays_white_for_positive_c() {
        let mut g = GrayImage::new(64, 64);
        g.set(32, 32, 255);
        let a = adaptive_threshold(&g, &FilterConfig::default()).unwrap();
        assert_eq!(a.get(32, 32), 255);
        // black far field: 0 > (~0) - 2
        assert_eq!(a.get(0, 0), 255);
        // neighbours of the bright pixel sit below mean - c
        let a0 = adaptive_threshold(&g, &cfg_with_c(-1)).unwrap();
        assert_eq!(a0.get(32, 32), 255);
        assert_eq!(a0.get(0, 0), 0);
        assert_eq!(a0.get(33, 32), 0);
    }

    #[test]
    fn huge_offset_marks_everything() {
        let g = GrayImage::from_fn(20, 20, |x, y| ((x * 37 + y * 11) % 256) as u8);
        let a = adaptive_threshold(&g, &cfg_with_c(255)).unwrap();
        assert!(a.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn even_block_is_a_parameter_error() {
        let g = GrayImage::new(8, 8);
        let cfg = FilterConfig {
            adaptive_block_size: 4,
            ..Default::default()
        };
        assert!(matches!(
            adaptive_threshold(&g, &cfg),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn binary_threshold_examples() {
        let zero = GrayImage::new(10, 10);
        assert!(binary_threshold(&zero, 100).data().iter().all(|&v| v == 0));

        let half = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 0 } else { 200 });
        let m = binary_threshold(&half, 0);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(m.get(x, y), if x < 5 { 0 } else { 255 });
            }
        }

        let full = GrayImage::filled(10, 10, 255);
        assert!(binary_threshold(&full, 100).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn binary_threshold_is_idempotent_on_two_level_images() {
        let g = GrayImage::from_fn(9, 7, |x, y| if (x * y) % 3 == 0 { 255 } else { 0 });
        let once = binary_threshold(&g, 0);
        assert_eq!(binary_threshold(&once, 0), once);
    }
}
