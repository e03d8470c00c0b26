//! Central finite-difference oracle shared by the gradient and acceptance suites.
#![allow(dead_code)]

use moment_match::network::{single_hidden_layer, Activation, NetworkState};
use moment_match::{DiscrepancySpec, LabeledSample, Sample};
use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

/// Relative error, `None` when both magnitudes are below 1e-8.
pub fn rel_err(a: f64, b: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs());
    (scale >= 1e-8).then(|| (a - b).abs() / scale)
}

pub fn max_rel<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter()
        .zip(b)
        .filter_map(|(&p, &q)| rel_err(p, q))
        .fold(0.0, f64::max)
}

pub fn random_unit_sample(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Sample {
    Sample::new(
        Array2::from_shape_simple_fn((rows, dim), || rng.random_range(0.05..0.95)),
        moment_match::Bounds::unit(),
    )
    .unwrap()
}

/// d f / d x by central differences over every entry of `x`.
pub fn numeric_grad(x: &Sample, f: impl Fn(&Sample) -> f64) -> Array2<f64> {
    let mut data = x.data().to_owned();
    let mut out = Array2::zeros(data.raw_dim());
    let cols = data.ncols();
    for idx in 0..data.len() {
        let (i, j) = (idx / cols, idx % cols);
        let orig = data[[i, j]];
        data[[i, j]] = orig + STEP;
        let up = f(&Sample::new(data.clone(), x.bounds()).unwrap());
        data[[i, j]] = orig - STEP;
        let down = f(&Sample::new(data.clone(), x.bounds()).unwrap());
        data[[i, j]] = orig;
        out[[i, j]] = (up - down) / (2.0 * STEP);
    }
    out
}

/// Max relative error between `loss_and_grad` and central differences of
/// the scalar loss over all parameters of a random 2 -> 4 -> 2 network.
pub fn network_grad_error(spec: DiscrepancySpec, activation: Activation, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = NetworkState::init(&single_hidden_layer(2, 4, 2, activation), seed).unwrap();
    let xs = Array2::from_shape_simple_fn((5, 2), || rng.random_range(-2.0..2.0));
    let source = LabeledSample::from_classes(xs, &[0, 1, 1, 0, 1], 2).unwrap();
    let target = Array2::from_shape_simple_fn((5, 2), || rng.random_range(-1.0..3.0));

    let grads = state.loss_and_grad(&source, target.view(), &spec).unwrap().grads;
    let analytic: Vec<f64> = grads.slices().into_iter().flatten().copied().collect();

    let mut probe = state.clone();
    let lens: Vec<usize> = probe.param_slices_mut().iter().map(|s| s.len()).collect();
    let mut numeric = Vec::new();
    for (t, len) in lens.into_iter().enumerate() {
        for e in 0..len {
            let orig = probe.param_slices_mut()[t][e];
            let mut eval = |v: f64| {
                probe.param_slices_mut()[t][e] = v;
                probe.loss_and_grad(&source, target.view(), &spec).unwrap().loss
            };
            let up = eval(orig + STEP);
            let down = eval(orig - STEP);
            eval(orig);
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    max_rel(&analytic, &numeric)
}
