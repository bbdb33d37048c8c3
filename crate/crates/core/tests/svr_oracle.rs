mod common;

use bellowsense::regression::{SolverOptions, SvrHyperparams};
use common::{svr_instance, svr_oracle_gaps, svr_oracle_gaps_with, SvrInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn smo_matches_projected_gradient_oracle() {
    for seed in 0..5 {
        let (rel, pred) = svr_oracle_gaps(&svr_instance(seed), 100 + seed);
        assert!(rel < 1e-4, "seed {seed}: relative objective gap {rel:e}");
        assert!(pred < 1e-3, "seed {seed}: prediction gap {pred:e}");
    }
}

#[test]
fn twenty_point_planar_instance_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let x: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let y = x.iter().map(|v| (2.0 * v[0]).sin() + 0.5 * v[1] * v[1]).collect();
    let inst = SvrInstance {
        x,
        y,
        hp: SvrHyperparams::new(0.01, 100.0, 1.0),
    };
    // The tube is only ten times the default KKT tolerance wide, so the
    // solver is run to a tolerance below the compared precision.
    let opts = SolverOptions {
        tol: 1e-5,
        ..SolverOptions::default()
    };
    let (rel, pred) = svr_oracle_gaps_with(&inst, 7, &opts);
    assert!(rel < 1e-4, "relative objective gap {rel:e}");
    assert!(pred < 1e-3, "prediction gap {pred:e}");
}
