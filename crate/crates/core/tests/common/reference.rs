//! Brute-force reference implementations used as test oracles.
//!
//! Everything here is written for clarity: direct 2-D windows, per-pixel
//! searches and fixed-point iteration. None of it calls into the optimized
//! filters or the SMO solver.

#![allow(dead_code)]

use bellowsense::imaging::{FilterConfig, GrayImage, RgbImage};

fn clamp(i: i64, len: usize) -> usize {
    i.max(0).min(len as i64 - 1) as usize
}

fn px(g: &GrayImage, x: i64, y: i64) -> i64 {
    g.get(clamp(x, g.width()), clamp(y, g.height())) as i64
}

fn image(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> GrayImage {
    let mut out = GrayImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, f(x, y));
        }
    }
    out
}

/// Luma by searching for the integer nearest to
/// `(299 R + 587 G + 114 B) / 1000`, ties going up.
pub fn grayscale(rgb: &RgbImage) -> GrayImage {
    image(rgb.width(), rgb.height(), |x, y| {
        let [r, g, b] = rgb.pixel(x, y);
        let target = 299 * r as i64 + 587 * g as i64 + 114 * b as i64;
        let mut best = 0i64;
        for v in 0..=255i64 {
            let d = (1000 * v - target).abs();
            let bd = (1000 * best - target).abs();
            if d < bd || (d == bd && v > best) {
                best = v;
            }
        }
        best as u8
    })
}

/// Integer Gaussian window: `round(2048 * w_i)` with normalized weights.
fn window(size: usize) -> Vec<i64> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let c = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| (r / s * 2048.0).round() as i64).collect()
}

/// Adaptive threshold with the full 2-D window summed directly.
pub fn adaptive_threshold(g: &GrayImage, cfg: &FilterConfig) -> GrayImage {
    let n = cfg.adaptive_block_size;
    let q = window(n);
    let total: i64 = q.iter().sum();
    let half = (n / 2) as i64;
    image(g.width(), g.height(), |x, y| {
        let mut acc: i64 = 0;
        for dy in -half..=half {
            for dx in -half..=half {
                let wgt = q[(dy + half) as usize] * q[(dx + half) as usize];
                acc += wgt * px(g, x as i64 + dx, y as i64 + dy);
            }
        }
        // g > acc / total^2 - c, in exact rationals
        let lhs = (px(g, x as i64, y as i64) + cfg.adaptive_c as i64) * total * total;
        if lhs > acc {
            cfg.adaptive_max_value
        } else {
            0
        }
    })
}

pub fn binary_threshold(g: &GrayImage, offset: i32) -> GrayImage {
    let mean = g.data().iter().map(|&v| v as f64).sum::<f64>() / g.len() as f64;
    let t = mean + offset as f64;
    image(g.width(), g.height(), |x, y| if (g.get(x, y) as f64) > t { 255 } else { 0 })
}

pub fn morph(a: &GrayImage, k: usize, dilate: bool) -> GrayImage {
    let half = (k / 2) as i64;
    image(a.width(), a.height(), |x, y| {
        let mut v = if dilate { 0 } else { 255 };
        for dy in -half..=half {
            for dx in -half..=half {
                let p = px(a, x as i64 + dx, y as i64 + dy);
                v = if dilate { v.max(p) } else { v.min(p) };
            }
        }
        v as u8
    })
}

fn binomial(n: usize, k: usize) -> i64 {
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// 2-D Sobel kernel for `d/dx`: `kx[dy][dx]`.
fn sobel_2d(k: usize) -> Vec<Vec<i64>> {
    let smooth: Vec<i64> = (0..k).map(|i| binomial(k - 1, i)).collect();
    // derivative row: binomial(k-3) convolved with [-1, 0, 1]
    let base: Vec<i64> = (0..k - 2).map(|i| binomial(k - 3, i)).collect();
    let deriv: Vec<i64> = (0..k)
        .map(|i| {
            let right = if i >= 2 { base[i - 2] } else { 0 };
            let left = if i < base.len() { base[i] } else { 0 };
            right - left
        })
        .collect();
    (0..k)
        .map(|r| (0..k).map(|c| smooth[r] * deriv[c]).collect())
        .collect()
}

/// Canny via 2-D Sobel windows, `atan2` direction sectors, floating-point
/// magnitudes and hysteresis by repeated sweeps.
pub fn canny(g: &GrayImage, cfg: &FilterConfig) -> GrayImage {
    let (w, h) = (g.width(), g.height());
    let k = cfg.canny_kernel;
    let kx = sobel_2d(k);
    let half = (k / 2) as i64;
    let mut gx = vec![0i64; w * h];
    let mut gy = vec![0i64; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut sx, mut sy) = (0, 0);
            for dy in -half..=half {
                for dx in -half..=half {
                    let v = px(g, x as i64 + dx, y as i64 + dy);
                    let (r, c) = ((dy + half) as usize, (dx + half) as usize);
                    sx += kx[r][c] * v;
                    // d/dy kernel is the transpose
                    sy += kx[c][r] * v;
                }
            }
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
        }
    }
    let mag = |x: i64, y: i64| {
        let i = clamp(y, h) * w + clamp(x, w);
        ((gx[i] * gx[i] + gy[i] * gy[i]) as f64).sqrt()
    };

    // 0 none, 1 weak, 2 strong
    let mut class = vec![0u8; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let m = mag(x, y);
            if !(m > cfg.canny_low) {
                continue;
            }
            let mut deg = (gy[i] as f64).atan2(gx[i] as f64).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            // Neighbours along the gradient; the first one has the smaller
            // row (or column for horizontal gradients).
            let (a, b) = if deg < 22.5 || deg >= 157.5 {
                ((x - 1, y), (x + 1, y))
            } else if deg < 67.5 {
                ((x - 1, y - 1), (x + 1, y + 1))
            } else if deg < 112.5 {
                ((x, y - 1), (x, y + 1))
            } else {
                ((x + 1, y - 1), (x - 1, y + 1))
            };
            if m > mag(a.0, a.1) && m >= mag(b.0, b.1) {
                class[i] = if m > cfg.canny_high { 2 } else { 1 };
            }
        }
    }
    loop {
        let mut changed = false;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let i = y as usize * w + x as usize;
                if class[i] != 1 {
                    continue;
                }
                let linked = (-1..=1).any(|dy| {
                    (-1..=1).any(|dx| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0
                            && ny >= 0
                            && nx < w as i64
                            && ny < h as i64
                            && class[ny as usize * w + nx as usize] == 2
                    })
                });
                if linked {
                    class[i] = 2;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    image(w, h, |x, y| if class[y * w + x] == 2 { 255 } else { 0 })
}

/// Region means, assigning each pixel to its region by linear search.
pub fn average_pool(g: &GrayImage, s: usize) -> Vec<f64> {
    let region = |p: usize, len: usize| (0..s).find(|&j| j * len / s <= p && p < (j + 1) * len / s).unwrap();
    let mut sums = vec![0u64; s * s];
    let mut counts = vec![0u64; s * s];
    for y in 0..g.height() {
        for x in 0..g.width() {
            let r = region(y, g.height()) * s + region(x, g.width());
            sums[r] += g.get(x, y) as u64;
            counts[r] += 1;
        }
    }
    sums.iter().zip(&counts).map(|(&a, &c)| a as f64 / c as f64).collect()
}

/// Result of the reference QP solve of the epsilon-SVR dual.
pub struct QpSolution {
    /// `alpha - alpha*` per point.
    pub coefs: Vec<f64>,
    pub bias: f64,
    /// Maximized dual objective.
    pub objective: f64,
}

/// Projects `v` onto `{0 <= b <= cost, sum_t s_t b_t = 0}` by bisection on
/// the multiplier of the equality constraint.
fn project(v: &[f64], s: &[f64], cost: f64) -> Vec<f64> {
    let at = |lam: f64| -> (Vec<f64>, f64) {
        let b: Vec<f64> = v.iter().zip(s).map(|(vi, si)| (vi - lam * si).clamp(0.0, cost)).collect();
        let r = b.iter().zip(s).map(|(bi, si)| bi * si).sum();
        (b, r)
    };
    // residual is non-increasing in lambda
    let (mut lo, mut hi) = (-1.0, 1.0);
    while at(lo).1 < 0.0 {
        lo *= 2.0;
    }
    while at(hi).1 > 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Accelerated projected gradient (FISTA with adaptive restart) on the
/// epsilon-SVR dual in `2n` variables.
pub fn svr_dual_qp(x: &[Vec<f64>], y: &[f64], eps: f64, cost: f64, gamma: f64) -> QpSolution {
    let n = x.len();
    let k: Vec<Vec<f64>> = x
        .iter()
        .map(|a| {
            x.iter()
                .map(|b| (-gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp())
                .collect()
        })
        .collect();
    let s: Vec<f64> = (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
    let p: Vec<f64> = (0..2 * n).map(|t| if t < n { eps - y[t] } else { eps + y[t - n] }).collect();
    let qmul = |b: &[f64]| -> Vec<f64> {
        let c: Vec<f64> = (0..n).map(|i| b[i] - b[i + n]).collect();
        (0..2 * n)
            .map(|t| s[t] * (0..n).map(|u| k[t % n][u] * c[u]).sum::<f64>())
            .collect()
    };
    let f = |b: &[f64]| -> f64 {
        let qb = qmul(b);
        0.5 * b.iter().zip(&qb).map(|(a, c)| a * c).sum::<f64>() + b.iter().zip(&p).map(|(a, c)| a * c).sum::<f64>()
    };
    // Lipschitz bound: largest eigenvalue of Q is at most 2 * max row sum of |K|.
    let lip = 2.0 * k.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip;
    let mut b = vec![0.0; 2 * n];
    let mut z = b.clone();
    let mut t = 1.0f64;
    let mut fb = f(&b);
    for _ in 0..200_000 {
        let gz = qmul(&z);
        let v: Vec<f64> = (0..2 * n).map(|i| z[i] - step * (gz[i] + p[i])).collect();
        let nb = project(&v, &s, cost);
        let fnb = f(&nb);
        if fnb > fb {
            // restart momentum
            z = b.clone();
            t = 1.0;
            continue;
        }
        let nt = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..2 * n).map(|i| nb[i] + (t - 1.0) / nt * (nb[i] - b[i])).collect();
        let delta: f64 = nb.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        b = nb;
        fb = fnb;
        t = nt;
        if delta < 1e-14 * cost.max(1.0) {
            break;
        }
    }

    // Bias from KKT conditions: free alpha_i gives y_i - eps - f0(x_i),
    // free alpha*_i gives y_i + eps - f0(x_i).
    let c: Vec<f64> = (0..n).map(|i| b[i] - b[i + n]).collect();
    let f0: Vec<f64> = (0..n).map(|i| (0..n).map(|j| c[j] * k[j][i]).sum()).collect();
    let tol = 1e-9 * cost;
    let mut free = Vec::new();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let (a, a_star) = (b[i], b[i + n]);
        let up = y[i] - eps - f0[i];
        let down = y[i] + eps - f0[i];
        if a > tol && a < cost - tol {
            free.push(up);
        }
        if a_star > tol && a_star < cost - tol {
            free.push(down);
        }
        // alpha = 0: b >= up; alpha = K: b <= up; alpha* = 0: b <= down;
        // alpha* = K: b >= down
        if a <= tol {
            lo = lo.max(up);
        }
        if a >= cost - tol {
            hi = hi.min(up);
        }
        if a_star <= tol {
            hi = hi.min(down);
        }
        if a_star >= cost - tol {
            lo = lo.max(down);
        }
    }
    let bias = if free.is_empty() {
        0.5 * (lo + hi)
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    QpSolution {
        coefs: c,
        bias,
        objective: -fb,
    }
}

pub fn svr_predict(x: &[Vec<f64>], sol: &QpSolution, gamma: f64, u: &[f64]) -> f64 {
    x.iter()
        .zip(&sol.coefs)
        .map(|(xi, c)| c * (-gamma * xi.iter().zip(u).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp())
        .sum::<f64>()
        + sol.bias
}
