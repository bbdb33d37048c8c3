//! Synthetic interior camera: draws the dashed rings and dots printed on the
//! inside of each bellow as seen from the base-mounted camera.
//!
//! The projection is a plain pinhole model: a feature at lateral offset `r`
//! and depth `d` lands `focal * r / d` pixels from the image centre.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::noise;
use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::pose::Pose;

/// Geometry of the printed interior pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSpec {
    pub num_bellows: usize,
    /// Ring radius per bellow in mm, nearest the camera first.
    pub ring_radii: Vec<f64>,
    /// Dashes per ring.
    pub dash_count: Vec<usize>,
    /// Fraction of each dash period that is painted.
    pub dash_duty: f64,
    /// Painted line width in mm.
    pub line_width: f64,
    /// Dots scattered around each ring.
    pub dot_count: usize,
    pub dot_diameter: f64,
    pub collapsed_diameter: f64,
    /// Height of one collapsed bellow in mm.
    pub bellow_height: f64,
    /// Seed of the (fixed) dot layout.
    pub dot_seed: u64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self {
            num_bellows: 4,
            ring_radii: vec![25.0, 45.0, 60.0, 68.0],
            dash_count: vec![12, 18, 24, 30],
            dash_duty: 0.55,
            line_width: 1.6,
            dot_count: 10,
            dot_diameter: 2.0,
            collapsed_diameter: 140.0,
            bellow_height: 8.0,
            dot_seed: 0x5EED,
        }
    }
}

impl PatternSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_bellows;
        if n == 0 || self.ring_radii.len() != n || self.dash_count.len() != n {
            return Err(Error::Parameter(
                "ring_radii and dash_count need one entry per bellow".into(),
            ));
        }
        if self.ring_radii[0] <= 0.0 || self.ring_radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "ring radii must be positive and increasing".into(),
            ));
        }
        if *self.ring_radii.last().unwrap() > self.collapsed_diameter / 2.0 {
            return Err(Error::Parameter(
                "rings must fit inside the collapsed diameter".into(),
            ));
        }
        if !(self.dot_diameter > 0.0) || !(self.line_width > 0.0) || !(self.bellow_height > 0.0) {
            return Err(Error::Parameter(
                "dot diameter, line width and bellow height must be positive".into(),
            ));
        }
        if !(self.dash_duty > 0.0 && self.dash_duty <= 1.0) {
            return Err(Error::Parameter("dash_duty must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Depth of bellow `k` (0 = nearest) above the lens for elongation `z`.
    pub fn bellow_depth(&self, k: usize, z: f64) -> f64 {
        (k + 1) as f64 * (self.bellow_height + z / self.num_bellows as f64)
    }

    /// Lateral displacement fraction of bellow `k`; the top moves fully.
    pub fn bellow_shift(&self, k: usize) -> f64 {
        (k + 1) as f64 / self.num_bellows as f64
    }

    /// Dot positions per bellow as (angle, radius in mm).
    fn dot_layout(&self) -> Vec<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.dot_seed);
        self.ring_radii
            .iter()
            .map(|&r| {
                (0..self.dot_count)
                    .map(|_| {
                        let angle = rng.random_range(0.0..TAU);
                        let offset = rng.random_range(-6.0..6.0);
                        let max_r = self.collapsed_diameter / 2.0 - self.dot_diameter;
                        (angle, (r + offset).clamp(self.dot_diameter, max_r))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Image size and photometric parameters of the simulated camera.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Focal length in units of the image height.
    pub focal: f64,
    /// Standard deviation of additive pixel noise, in intensity units.
    pub noise_sigma: f64,
    /// Below this elongation (mm) the interior lighting fades linearly.
    pub lighting_knee: f64,
}

impl Camera {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            focal: 0.6,
            noise_sigma: 2.0,
            lighting_knee: 20.0,
        }
    }

    pub fn focal_px(&self) -> f64 {
        self.focal * self.height as f64
    }

    fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    /// Global brightness factor `min(1, z / knee)`.
    pub fn brightness(&self, z: f64) -> f64 {
        if self.lighting_knee <= 0.0 {
            1.0
        } else {
            (z / self.lighting_knee).clamp(0.0, 1.0)
        }
    }
}

impl Default for Camera {
    fn default() -> Self {
        Self::new(640, 480)
    }
}

/// Projected ring of one bellow, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedRing {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub depth: f64,
}

/// Projects each bellow ring for `pose`.
pub fn project_rings(pose: &Pose, spec: &PatternSpec, cam: &Camera) -> Vec<ProjectedRing> {
    let f = cam.focal_px();
    let (cx, cy) = cam.center();
    (0..spec.num_bellows)
        .map(|k| {
            let depth = spec.bellow_depth(k, pose.z);
            let s = spec.bellow_shift(k);
            ProjectedRing {
                cx: cx + f * s * pose.x / depth,
                cy: cy + f * s * pose.y / depth,
                radius: f * spec.ring_radii[k] / depth,
                depth,
            }
        })
        .collect()
}

/// Renders the interior view for `pose`. Deterministic in `(pose, spec,
/// cam, seed)`; `seed` only drives the pixel noise.
pub fn render_frame(pose: &Pose, spec: &PatternSpec, cam: &Camera, seed: u64) -> Result<GrayImage> {
    spec.validate()?;
    if !pose.is_finite() || pose.z < 0.0 {
        return Err(Error::Frustum(format!("{pose:?}")));
    }
    if cam.width == 0 || cam.height == 0 {
        return Err(Error::Dimension("camera has an empty sensor".into()));
    }
    let rings = project_rings(pose, spec, cam);
    for r in &rings {
        if r.cx < 0.0 || r.cy < 0.0 || r.cx >= cam.width as f64 || r.cy >= cam.height as f64 {
            return Err(Error::Frustum(format!(
                "{pose:?} moves a ring centre off the sensor"
            )));
        }
    }

    let mut canvas = Canvas::new(cam.width, cam.height);
    let f = cam.focal_px();
    let dots = spec.dot_layout();
    for (k, ring) in rings.iter().enumerate() {
        let half_width = 0.5 * f * spec.line_width / ring.depth;
        let dashes = spec.dash_count[k].max(1);
        let period = TAU / dashes as f64;
        // stagger the dashes between bellows
        let phase = 0.37 * k as f64;
        for m in 0..dashes {
            let start = phase + m as f64 * period;
            canvas.arc(ring, start, period * spec.dash_duty, half_width);
        }
        let dot_r = 0.5 * f * spec.dot_diameter / ring.depth;
        for &(angle, radius) in &dots[k] {
            let rr = f * radius / ring.depth;
            let (s, c) = angle.sin_cos();
            canvas.disk(ring.cx + rr * c, ring.cy + rr * s, dot_r);
        }
    }

    let gain = 255.0 * cam.brightness(pose.z);
    let sigma = cam.noise_sigma;
    let mut data = vec![0u8; cam.width * cam.height];
    let frame_key = noise::mix64(seed);
    for (pair, (out, cov)) in data.chunks_mut(2).zip(canvas.cov.chunks(2)).enumerate() {
        let (n0, n1) = if sigma > 0.0 {
            noise::normal_pair(noise::derive(frame_key, pair as u64))
        } else {
            (0.0, 0.0)
        };
        out[0] = to_u8(gain * cov[0] as f64 + sigma * n0);
        if out.len() > 1 {
            out[1] = to_u8(gain * cov[1] as f64 + sigma * n1);
        }
    }
    GrayImage::from_raw(cam.width, cam.height, data)
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Coverage buffer with anti-aliased primitives (max-composited).
struct Canvas {
    width: usize,
    height: usize,
    cov: Vec<f32>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cov: vec![0.0; width * height],
        }
    }

    fn bbox(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<(usize, usize, usize, usize)> {
        let xa = x0.floor().max(0.0);
        let ya = y0.floor().max(0.0);
        let xb = x1.ceil().min(self.width as f64 - 1.0);
        let yb = y1.ceil().min(self.height as f64 - 1.0);
        if xa > xb || ya > yb {
            return None;
        }
        Some((xa as usize, ya as usize, xb as usize, yb as usize))
    }

    #[inline]
    fn paint(&mut self, x: usize, y: usize, signed_dist: f64) {
        let c = (0.5 - signed_dist).clamp(0.0, 1.0) as f32;
        let p = &mut self.cov[y * self.width + x];
        if c > *p {
            *p = c;
        }
    }

    fn disk(&mut self, cx: f64, cy: f64, r: f64) {
        let pad = r + 1.0;
        let Some((xa, ya, xb, yb)) = self.bbox(cx - pad, cy - pad, cx + pad, cy + pad) else {
            return;
        };
        for y in ya..=yb {
            let dy = y as f64 + 0.5 - cy;
            for x in xa..=xb {
                let dx = x as f64 + 0.5 - cx;
                self.paint(x, y, (dx * dx + dy * dy).sqrt() - r);
            }
        }
    }

    /// Arc of `ring` from angle `start` spanning `span`, round caps.
    fn arc(&mut self, ring: &ProjectedRing, start: f64, span: f64, half_width: f64) {
        let pad = half_width + 1.5;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        const STEPS: usize = 16;
        for i in 0..=STEPS {
            let a = start + span * i as f64 / STEPS as f64;
            let (s, c) = a.sin_cos();
            let (px, py) = (ring.cx + ring.radius * c, ring.cy + ring.radius * s);
            x0 = x0.min(px);
            y0 = y0.min(py);
            x1 = x1.max(px);
            y1 = y1.max(py);
        }
        // chord sagitta between samples
        let sag = ring.radius * (1.0 - (span / STEPS as f64 / 2.0).cos());
        let pad = pad + sag;
        let Some((xa, ya, xb, yb)) = self.bbox(x0 - pad, y0 - pad, x1 + pad, y1 + pad) else {
            return;
        };
        let (s0, c0) = start.sin_cos();
        let (s1, c1) = (start + span).sin_cos();
        let e0 = (ring.cx + ring.radius * c0, ring.cy + ring.radius * s0);
        let e1 = (ring.cx + ring.radius * c1, ring.cy + ring.radius * s1);
        for y in ya..=yb {
            let py = y as f64 + 0.5;
            let dy = py - ring.cy;
            for x in xa..=xb {
                let px = x as f64 + 0.5;
                let dx = px - ring.cx;
                let rel = (dy.atan2(dx) - start).rem_euclid(TAU);
                let dist = if rel <= span {
                    ((dx * dx + dy * dy).sqrt() - ring.radius).abs()
                } else {
                    let d0 = (px - e0.0).hypot(py - e0.1);
                    let d1 = (px - e1.0).hypot(py - e1.1);
                    d0.min(d1)
                };
                self.paint(x, y, dist - half_width);
            }
        }
    }
}
