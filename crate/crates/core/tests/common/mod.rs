//! Shared helpers for the integration tests.

#![allow(dead_code)]

pub mod reference;

use bellowsense::imaging::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random test image. Cycles through pure noise, smooth blobs,
/// blocky regions and gradients so every filter sees varied structure.
pub fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match seed % 4 {
        0 => GrayImage::from_fn(w, h, |_, _| rng.random()),
        1 => {
            let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.random_range(0.0..w as f64),
                        rng.random_range(0.0..h as f64),
                        rng.random_range(2.0..10.0),
                        rng.random_range(-200.0..200.0),
                    )
                })
                .collect();
            let base: f64 = rng.random_range(40.0..200.0);
            GrayImage::from_fn(w, h, |x, y| {
                let v = blobs.iter().fold(base, |acc, &(cx, cy, r, a)| {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    acc + a * (-d2 / (2.0 * r * r)).exp()
                });
                v.round().clamp(0.0, 255.0) as u8
            })
        }
        2 => {
            let cell = rng.random_range(3..9);
            let levels: Vec<u8> = (0..64).map(|_| rng.random()).collect();
            GrayImage::from_fn(w, h, |x, y| levels[((x / cell) * 7 + (y / cell) * 3) % 64])
        }
        _ => {
            let (ax, ay) = (rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0));
            let noise: Vec<i32> = (0..w * h).map(|_| rng.random_range(-6..=6)).collect();
            GrayImage::from_fn(w, h, |x, y| {
                let v = 128.0 + ax * (x as f64 - w as f64 / 2.0) + ay * (y as f64 - h as f64 / 2.0);
                (v as i32 + noise[y * w + x]).clamp(0, 255) as u8
            })
        }
    }
}

/// Small SVR problem with its hyperparameters.
pub struct SvrInstance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub hp: bellowsense::regression::SvrHyperparams,
}

/// Seeded instance with `12 <= n <= 30` points in `1..=5` dimensions.
pub fn svr_instance(seed: u64) -> SvrInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(12..=30);
    let d = rng.random_range(1..=5);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(k, v)| (v * (k + 1) as f64).sin()).sum::<f64>() * 3.0 + rng.random_range(-0.3..0.3))
        .collect();
    let hp = bellowsense::regression::SvrHyperparams::new(
        rng.random_range(0.05..0.5),
        [0.5, 2.0, 10.0, 100.0][rng.random_range(0..4)],
        rng.random_range(0.1..1.5),
    );
    SvrInstance { x, y, hp }
}

/// Trains `inst` with the default solver and the oracle; returns the
/// relative dual objective gap and the largest prediction gap over 20
/// random queries.
pub fn svr_oracle_gaps(inst: &SvrInstance, query_seed: u64) -> (f64, f64) {
    svr_oracle_gaps_with(inst, query_seed, &bellowsense::regression::SolverOptions::default())
}

pub fn svr_oracle_gaps_with(
    inst: &SvrInstance,
    query_seed: u64,
    opts: &bellowsense::regression::SolverOptions,
) -> (f64, f64) {
    use bellowsense::regression::train_svr_full;
    let (model, stats, _) = train_svr_full(&inst.x, &inst.y, &inst.hp, opts).unwrap();
    let qp = reference::svr_dual_qp(&inst.x, &inst.y, inst.hp.epsilon, inst.hp.cost, inst.hp.gamma);
    let rel = (stats.objective - qp.objective).abs() / qp.objective.abs().max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(query_seed);
    let d = inst.x[0].len();
    let worst = (0..20)
        .map(|_| {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            (model.predict(&u).unwrap() - reference::svr_predict(&inst.x, &qp, inst.hp.gamma, &u)).abs()
        })
        .fold(0.0, f64::max);
    (rel, worst)
}
