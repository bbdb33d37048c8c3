use super::{clamp_index, FilterConfig, GrayImage};
use crate::error::{Error, Result};

/// Separable Sobel kernels `(smoothing, derivative)` for an odd aperture.
///
/// Smoothing is the binomial row of order `size - 1`; the derivative is the
/// binomial row of order `size - 3` convolved with `[-1, 0, 1]`.
pub fn sobel_kernels(size: usize) -> (Vec<i32>, Vec<i32>) {
    let binomial = |order: usize| {
        let mut row = vec![1i32];
        for _ in 0..order {
            let mut next = vec![0i32; row.len() + 1];
            for (i, &v) in row.iter().enumerate() {
                next[i] += v;
                next[i + 1] += v;
            }
            row = next;
        }
        row
    };
    let smooth = binomial(size - 1);
    let base = binomial(size - 3);
    let mut deriv = vec![0i32; size];
    for (i, &v) in base.iter().enumerate() {
        deriv[i] -= v;
        deriv[i + 2] += v;
    }
    (smooth, deriv)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sector {
    Horizontal,
    Vertical,
    Diagonal,
    AntiDiagonal,
}

/// Gradient direction quantized to four sectors with exact integer tests
/// against tan(22.5°) = √2 − 1 and tan(67.5°) = √2 + 1.
#[inline]
fn sector(gx: i64, gy: i64) -> Sector {
    let ax = gx.abs();
    let ay = gy.abs();
    let s = ax + ay;
    if s * s < 2 * ax * ax {
        Sector::Horizontal
    } else if ay > ax && (ay - ax) * (ay - ax) > 2 * ax * ax {
        Sector::Vertical
    } else if (gx > 0) == (gy > 0) {
        Sector::Diagonal
    } else {
        Sector::AntiDiagonal
    }
}

/// Canny edge detector without pre-smoothing.
///
/// Sobel gradients with the configured aperture, L2 magnitude,
/// non-maximum suppression in four directions and 8-connected hysteresis.
/// A pixel is a candidate when its magnitude is strictly above `canny_low`
/// and a seed when strictly above `canny_high`. Output is 0/255.
pub fn canny(g: &GrayImage, cfg: &FilterConfig) -> Result<GrayImage> {
    let k = cfg.canny_kernel;
    if k < 3 || k % 2 == 0 || k > 7 {
        return Err(Error::Parameter(format!("unsupported Sobel aperture {k}")));
    }
    let (w, h) = (g.width(), g.height());
    if w < k || h < k {
        return Err(Error::Dimension(format!(
            "{w}x{h} image is smaller than the {k}x{k} Sobel kernel"
        )));
    }
    // Apertures up to 5 keep gradients within 16 bits and squared
    // magnitudes within 32.
    Ok(if k <= 5 {
        let (gx, gy) = gradients::<i16>(g, k);
        suppress_and_link(&gx, &gy, w, h, cfg)
    } else {
        let (gx, gy) = gradients::<i32>(g, k);
        suppress_and_link(&gx, &gy, w, h, cfg)
    })
}

trait Lane:
    Copy + Default + std::ops::Add<Output = Self> + std::ops::Mul<Output = Self> + std::ops::AddAssign
{
    /// Squared-magnitude type.
    type Mag: Copy + Default + Ord + TryFrom<i64>;
    fn from_u8(v: u8) -> Self;
    fn from_i32(v: i32) -> Self;
    fn wide(self) -> i64;
    fn mag(a: Self, b: Self) -> Self::Mag;
}

impl Lane for i16 {
    type Mag = i32;
    fn from_u8(v: u8) -> Self {
        v as i16
    }
    fn from_i32(v: i32) -> Self {
        v as i16
    }
    fn wide(self) -> i64 {
        self as i64
    }
    #[inline(always)]
    fn mag(a: Self, b: Self) -> i32 {
        a as i32 * a as i32 + b as i32 * b as i32
    }
}

impl Lane for i32 {
    type Mag = i64;
    fn from_u8(v: u8) -> Self {
        v as i32
    }
    fn from_i32(v: i32) -> Self {
        v
    }
    fn wide(self) -> i64 {
        self as i64
    }
    #[inline(always)]
    fn mag(a: Self, b: Self) -> i64 {
        a as i64 * a as i64 + b as i64 * b as i64
    }
}

/// Separable Sobel responses `(gx, gy)` with replicated borders.
fn gradients<T: Lane>(g: &GrayImage, k: usize) -> (Vec<T>, Vec<T>) {
    let (w, h) = (g.width(), g.height());
    let (smooth, deriv) = sobel_kernels(k);
    let smooth: Vec<T> = smooth.into_iter().map(T::from_i32).collect();
    let deriv: Vec<T> = deriv.into_iter().map(T::from_i32).collect();
    let half = (k / 2) as isize;

    // Row pass: horizontal derivative and horizontal smoothing.
    let mut row_d = vec![T::default(); w * h];
    let mut row_s = vec![T::default(); w * h];
    let mut padded = vec![T::default(); w + k - 1];
    for y in 0..h {
        let src = g.row(y);
        for (i, p) in padded.iter_mut().enumerate() {
            *p = T::from_u8(src[clamp_index(i as isize - half, w)]);
        }
        let od = &mut row_d[y * w..(y + 1) * w];
        let os = &mut row_s[y * w..(y + 1) * w];
        for t in 0..k {
            let (wd, ws) = (deriv[t], smooth[t]);
            let win = &padded[t..t + w];
            for ((d, s), &v) in od.iter_mut().zip(os.iter_mut()).zip(win) {
                *d += wd * v;
                *s += ws * v;
            }
        }
    }

    // Column pass: gx = smooth_y * deriv_x, gy = deriv_y * smooth_x.
    let mut gx = vec![T::default(); w * h];
    let mut gy = vec![T::default(); w * h];
    for y in 0..h {
        let ox = &mut gx[y * w..(y + 1) * w];
        let oy = &mut gy[y * w..(y + 1) * w];
        for t in 0..k {
            let src_y = clamp_index(y as isize + t as isize - half, h);
            let (ws, wd) = (smooth[t], deriv[t]);
            let rd = &row_d[src_y * w..(src_y + 1) * w];
            let rs = &row_s[src_y * w..(src_y + 1) * w];
            for ((ox, oy), (&d, &s)) in ox.iter_mut().zip(oy.iter_mut()).zip(rd.iter().zip(rs)) {
                *ox += ws * d;
                *oy += wd * s;
            }
        }
    }
    (gx, gy)
}

/// Largest integer `n` with `n <= t`, saturating; `m > t <=> m > n` for
/// integer `m`.
fn integer_floor(t: f64) -> i64 {
    if t.is_nan() {
        i64::MAX
    } else {
        t.floor().clamp(i64::MIN as f64, i64::MAX as f64) as i64
    }
}

/// Threshold on squared magnitude as the magnitude type: `m > t` for real
/// `t` is `m > floor(t)` for integer `m`. `None` when nothing can exceed it.
fn mag_threshold<M: TryFrom<i64>>(t: f64) -> Option<M> {
    let f = integer_floor(t);
    M::try_from(f).ok().or_else(|| if f < 0 { M::try_from(-1).ok() } else { None })
}

fn suppress_and_link<T: Lane>(gx: &[T], gy: &[T], w: usize, h: usize, cfg: &FilterConfig) -> GrayImage {
    const WEAK: u8 = 1;
    const EDGE: u8 = 255;
    let mut out = vec![0u8; w * h];
    let (Some(low), high) = (
        mag_threshold::<T::Mag>(cfg.canny_low * cfg.canny_low),
        mag_threshold::<T::Mag>(cfg.canny_high * cfg.canny_high),
    ) else {
        return GrayImage::from_raw(w, h, out).expect("same dimensions");
    };
    let fill_mag = |y: usize, dst: &mut [T::Mag]| {
        let (rx, ry) = (&gx[y * w..(y + 1) * w], &gy[y * w..(y + 1) * w]);
        for ((d, &a), &b) in dst.iter_mut().zip(rx).zip(ry) {
            *d = T::mag(a, b);
        }
    };
    // Rolling squared magnitudes of rows y-1, y, y+1 (replicated at borders).
    let mut rows = [vec![T::Mag::default(); w], vec![T::Mag::default(); w], vec![T::Mag::default(); w]];
    fill_mag(0, &mut rows[1]);
    rows[0] = rows[1].clone();
    let mut seeds = Vec::new();
    for y in 0..h {
        if y > 0 {
            rows.rotate_left(1);
        }
        if y + 1 < h {
            fill_mag(y + 1, &mut rows[2]);
        } else {
            rows[2] = rows[1].clone();
        }
        let [up, mid, down] = &rows;
        let at = |r: &[T::Mag], x: isize| r[clamp_index(x, w)];
        for (x, &m) in mid.iter().enumerate() {
            if m <= low {
                continue;
            }
            let i = y * w + x;
            let xi = x as isize;
            let (n1, n2) = match sector(gx[i].wide(), gy[i].wide()) {
                Sector::Horizontal => (at(mid, xi - 1), at(mid, xi + 1)),
                Sector::Vertical => (up[x], down[x]),
                Sector::Diagonal => (at(up, xi - 1), at(down, xi + 1)),
                Sector::AntiDiagonal => (at(up, xi + 1), at(down, xi - 1)),
            };
            if m > n1 && m >= n2 {
                if high.is_some_and(|hi| m > hi) {
                    out[i] = EDGE;
                    seeds.push(i);
                } else {
                    out[i] = WEAK;
                }
            }
        }
    }

    while let Some(i) = seeds.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out[j] == WEAK {
                    out[j] = EDGE;
                    seeds.push(j);
                }
            }
        }
    }
    for v in &mut out {
        if *v == WEAK {
            *v = 0;
        }
    }
    GrayImage::from_raw(w, h, out).expect("same dimensions")
}
