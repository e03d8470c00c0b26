//! Central finite-difference checks of the analytic gradients.

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discrepancy::{DiscrepancyKind, DiscrepancySpec};
use crate::error::Result;
use crate::network::{single_hidden_layer, Activation, NetworkState};
use crate::samples::{Bounds, LabeledSample, Sample};

/// Entries where both gradients are below this magnitude are skipped.
pub const NEGLIGIBLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub label: String,
    pub max_rel_error: f64,
    pub compared: usize,
}

/// `|a - b| / max(|a|, |b|)`, or `None` when both are negligible.
pub fn relative_error(analytic: f64, numeric: f64) -> Option<f64> {
    let scale = analytic.abs().max(numeric.abs());
    (scale >= NEGLIGIBLE).then(|| (analytic - numeric).abs() / scale)
}

fn fold_errors(pairs: impl IntoIterator<Item = (f64, f64)>) -> (f64, usize) {
    pairs
        .into_iter()
        .filter_map(|(a, n)| relative_error(a, n))
        .fold((0.0, 0), |(m, c), e| (m.max(e), c + 1))
}

/// Random sample with entries in `[margin, 1 - margin]` on the unit box.
pub fn random_unit_sample(rows: usize, dim: usize, margin: f64, rng: &mut ChaCha8Rng) -> Result<Sample> {
    let data = Array2::from_shape_simple_fn((rows, dim), || rng.random_range(margin..=1.0 - margin));
    Sample::new(data, Bounds::unit())
}

/// Compares the gradient of a discrepancy w.r.t. `X` against central
/// differences with step `h` on a random unit-box instance.
pub fn check_discrepancy(
    kind: DiscrepancyKind,
    n: usize,
    m: usize,
    dim: usize,
    seed: u64,
    h: f64,
) -> Result<GradCheckReport> {
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = h.clamp(0.0, 0.25);
    let x = random_unit_sample(n, dim, margin, &mut rng)?;
    let y = random_unit_sample(m, dim, margin, &mut rng)?;
    let analytic = kind.grad(&x, &y)?;

    let mut pairs = Vec::with_capacity(n * dim);
    let mut data = x.data().to_owned();
    for i in 0..n {
        for j in 0..dim {
            let orig = data[[i, j]];
            data[[i, j]] = orig + h;
            let up = kind.value(&Sample::new(data.clone(), x.bounds())?, &y)?.value;
            data[[i, j]] = orig - h;
            let down = kind.value(&Sample::new(data.clone(), x.bounds())?, &y)?.value;
            data[[i, j]] = orig;
            pairs.push((analytic[[i, j]], (up - down) / (2.0 * h)));
        }
    }
    let (max_rel_error, compared) = fold_errors(pairs);
    Ok(GradCheckReport {
        label: kind.name().to_string(),
        max_rel_error,
        compared,
    })
}

/// Checks the full regularized objective of a random `2 -> hidden -> 2`
/// network over every weight and bias.
pub fn check_network(
    spec: DiscrepancySpec,
    activation: Activation,
    hidden: usize,
    batch: usize,
    seed: u64,
    h: f64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = NetworkState::init(&single_hidden_layer(2, hidden, 2, activation), seed)?;
    let xs = Array2::from_shape_simple_fn((batch, 2), || rng.random_range(-2.0..=2.0));
    let classes: Vec<usize> = (0..batch).map(|i| i % 2).collect();
    let source = LabeledSample::from_classes(xs, &classes, 2)?;
    let target = Array2::from_shape_simple_fn((batch, 2), || rng.random_range(-1.0..=3.0));

    let analytic = state.loss_and_grad(&source, target.view(), &spec)?.grads;
    let analytic: Vec<f64> = analytic.slices().into_iter().flatten().copied().collect();

    let mut probe = state.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    let tensor_lens: Vec<usize> = probe.param_slices_mut().iter().map(|s| s.len()).collect();
    for (t, &len) in tensor_lens.iter().enumerate() {
        for e in 0..len {
            let orig = probe.param_slices_mut()[t][e];
            probe.param_slices_mut()[t][e] = orig + h;
            let up = probe.loss(&source, target.view(), &spec)?;
            probe.param_slices_mut()[t][e] = orig - h;
            let down = probe.loss(&source, target.view(), &spec)?;
            probe.param_slices_mut()[t][e] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    let (max_rel_error, compared) = fold_errors(analytic.into_iter().zip(numeric));
    Ok(GradCheckReport {
        label: format!("network+{}", spec.kind.name()),
        max_rel_error,
        compared,
    })
}
