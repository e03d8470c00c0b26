//! Analytic gradients against a central finite-difference oracle written
//! here, independently of the library's own `gradcheck` module.

mod common;

use common::{max_rel, network_grad_error, numeric_grad, random_unit_sample};
use moment_match::discrepancy::{cmd_k, cmd_k_grad, mkl, mkl_grad, mmd2, mmd2_grad};
use moment_match::network::Activation;
use moment_match::{Bounds, DiscrepancySpec, Sample};
use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cmd_grad_matches_finite_differences() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (random_unit_sample(&mut rng, 6, 3), random_unit_sample(&mut rng, 6, 3));
        let analytic = cmd_k_grad(&x, &y, 5).unwrap();
        let numeric = numeric_grad(&x, |s| cmd_k(s, &y, 5).unwrap().value);
        let err = max_rel(analytic.iter(), numeric.iter());
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn cmd_grad_on_wider_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let b = Bounds::new(-1.0, 1.0).unwrap();
    let x = Sample::new(Array2::from_shape_simple_fn((7, 2), || rng.random_range(-0.9..0.9)), b).unwrap();
    let y = Sample::new(Array2::from_shape_simple_fn((4, 2), || rng.random_range(-0.9..0.9)), b).unwrap();
    let analytic = cmd_k_grad(&x, &y, 7).unwrap();
    let numeric = numeric_grad(&x, |s| cmd_k(s, &y, 7).unwrap().value);
    assert!(max_rel(analytic.iter(), numeric.iter()) < 1e-5);
}

#[test]
fn mmd_grad_matches_finite_differences() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (x, y) = (random_unit_sample(&mut rng, 6, 3), random_unit_sample(&mut rng, 6, 3));
        let analytic = mmd2_grad(&x, &y, 1.0).unwrap();
        let numeric = numeric_grad(&x, |s| mmd2(s, &y, 1.0).unwrap());
        let err = max_rel(analytic.iter(), numeric.iter());
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn mkl_grad_matches_finite_differences() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (x, y) = (random_unit_sample(&mut rng, 6, 3), random_unit_sample(&mut rng, 5, 3));
        let analytic = mkl_grad(&x, &y).unwrap();
        let numeric = numeric_grad(&x, |s| mkl(s, &y).unwrap());
        let err = max_rel(analytic.iter(), numeric.iter());
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn network_objective_matches_finite_differences() {
    let specs = [
        DiscrepancySpec::cmd(5, 1.0).unwrap(),
        DiscrepancySpec::mmd(1.0, 1.0).unwrap(),
        DiscrepancySpec::mkl(1.0).unwrap(),
    ];
    for spec in specs {
        for activation in [Activation::Sigmoid, Activation::Tanh] {
            for seed in 0..3 {
                let err = network_grad_error(spec, activation, seed);
                assert!(err < 1e-4, "{spec:?} {activation:?} seed {seed}: {err}");
            }
        }
    }
}
