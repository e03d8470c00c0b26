//! Feedforward classifier with a bounded, domain-regularized hidden layer.
//!
//! The network is a chain of dense layers ending in softmax. Exactly one
//! hidden layer is flagged as the attachment point of the domain
//! regularizer; its activations must come from a bounded activation so
//! they form a [`Sample`] on a known interval.
//!
//! The training objective for a source batch `(X_s, Y_s)` and target batch
//! `X_t` is
//!
//! ```text
//! mean cross-entropy(f(X_s), Y_s) + lambda * d(A_H(X_s), A_H(X_t))
//! ```
//!
//! and [`NetworkState::loss_and_grad`] returns its exact gradient. The
//! regularizer's gradient flows through both the source and target
//! activations into the shared parameters.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{DiscrepancySpec, DiscrepancyValue};
use crate::error::{Error, Result};
use crate::samples::{Bounds, LabeledSample, Sample};

/// Floor applied to predicted probabilities inside the log of the cross-entropy.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softmax,
    /// `z` clipped to `[lo, hi]`; with `lo = 0` this is the usual clipped ReLU.
    ClippedRelu {
        lo: f64,
        hi: f64,
    },
}

impl Activation {
    /// The interval the activation maps into, for bounded activations.
    pub fn bounds(&self) -> Option<Bounds> {
        match *self {
            Activation::Sigmoid => Some(Bounds::unit()),
            Activation::Tanh => Bounds::new(-1.0, 1.0).ok(),
            Activation::ClippedRelu { lo, hi } => Bounds::new(lo, hi).ok(),
            Activation::Softmax => None,
        }
    }

    fn apply(&self, z: &Array2<f64>) -> Array2<f64> {
        match *self {
            Activation::Sigmoid => z.mapv(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::ClippedRelu { lo, hi } => z.mapv(|v| v.clamp(lo, hi)),
            Activation::Softmax => {
                let mut out = z.clone();
                for mut row in out.outer_iter_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let total = row.sum();
                    row /= total;
                }
                out
            }
        }
    }

    /// Multiplies `grad` (w.r.t. the activation output) by the derivative,
    /// giving the gradient w.r.t. the pre-activation.
    fn backprop(&self, grad: &mut Array2<f64>, pre: &Array2<f64>, post: &Array2<f64>) {
        match *self {
            Activation::Sigmoid => ndarray::Zip::from(grad).and(post).for_each(|g, &a| *g *= a * (1.0 - a)),
            Activation::Tanh => ndarray::Zip::from(grad).and(post).for_each(|g, &a| *g *= 1.0 - a * a),
            Activation::ClippedRelu { lo, hi } => ndarray::Zip::from(grad).and(pre).for_each(|g, &z| {
                if !(z > lo && z < hi) {
                    *g = 0.0;
                }
            }),
            Activation::Softmax => unreachable!("softmax is only used on the output layer"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Marks the hidden layer whose activations are regularized.
    #[serde(default)]
    pub regularize: bool,
}

impl LayerSpec {
    pub fn hidden(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            regularize: true,
        }
    }

    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            regularize: false,
        }
    }

    pub fn softmax(in_dim: usize, out_dim: usize) -> Self {
        Self::dense(in_dim, out_dim, Activation::Softmax)
    }
}

/// One regularized hidden layer of `hidden` units followed by a softmax output.
pub fn single_hidden_layer(inputs: usize, hidden: usize, classes: usize, activation: Activation) -> Vec<LayerSpec> {
    vec![
        LayerSpec::hidden(inputs, hidden, activation),
        LayerSpec::softmax(hidden, classes),
    ]
}

/// Checks the layer chain and returns the index of the regularized layer.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<usize> {
    let bad = |msg: String| Err(Error::InvalidArgument(msg));
    if specs.len() < 2 {
        return bad("need at least one hidden layer and an output layer".into());
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return bad(format!("layer {i} has a zero dimension"));
        }
        if let Activation::ClippedRelu { lo, hi } = s.activation {
            Bounds::new(lo, hi)?;
        }
    }
    for (i, w) in specs.windows(2).enumerate() {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::DimensionMismatch(format!(
                "layer {i} outputs {} but layer {} expects {}",
                w[0].out_dim,
                i + 1,
                w[1].in_dim
            )));
        }
    }
    let last = specs.len() - 1;
    if specs[last].activation != Activation::Softmax {
        return bad("the output layer must use softmax".into());
    }
    if specs[..last].iter().any(|s| s.activation == Activation::Softmax) {
        return bad("softmax is only permitted on the output layer".into());
    }
    let flagged: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].regularize).collect();
    match flagged[..] {
        [h] if h < last => Ok(h),
        [_] => bad("the output layer cannot be the regularized layer".into()),
        _ => bad(format!(
            "exactly one hidden layer must be flagged for regularization, found {}",
            flagged.len()
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub spec: LayerSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    layers: Vec<Layer>,
    seed: u64,
    hidden: usize,
}

/// Per-layer activations for one batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
    /// Activations of the regularized layer as a bounded sample.
    pub hidden: Sample,
}

impl ForwardTrace {
    /// Softmax outputs (the last layer's activations).
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("at least two layers")
    }
}

/// Gradients mirroring the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(state: &NetworkState) -> Self {
        Self {
            weights: state
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            bias: state.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    /// Flat views in the order used by [`NetworkState::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("contiguous"),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    pub task_loss: f64,
    pub reg_value: f64,
    /// CMD per-order breakdown of `reg_value`, when the measure is CMD.
    pub reg_terms: Option<Vec<f64>>,
    pub grads: Gradients,
}

impl NetworkState {
    /// Uniform init in `[-s, s]`, `s = sqrt(6 / (in + out))`, zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let hidden = validate_specs(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let s = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((spec.out_dim, spec.in_dim), || rng.random_range(-s..=s));
                Layer {
                    weights,
                    bias: Array1::zeros(spec.out_dim),
                    spec,
                }
            })
            .collect();
        Ok(Self { layers, seed, hidden })
    }

    /// Rebuilds a state from explicit parameters.
    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        let hidden = validate_specs(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.dim() != (l.spec.out_dim, l.spec.in_dim) || l.bias.len() != l.spec.out_dim {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} parameters do not match its spec"
                )));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        let layers = layers
            .into_iter()
            .map(|l| Layer {
                weights: l.weights.as_standard_layout().into_owned(),
                bias: l.bias,
                spec: l.spec,
            })
            .collect();
        Ok(Self { layers, seed, hidden })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the regularized hidden layer.
    pub fn hidden_index(&self) -> usize {
        self.hidden
    }

    pub fn hidden_bounds(&self) -> Bounds {
        self.layers[self.hidden]
            .spec
            .activation
            .bounds()
            .expect("validated hidden activation is bounded")
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("nonempty").spec.out_dim
    }

    /// Mutable flat views: weights then bias, layer by layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("contiguous"),
                ]
            })
            .collect()
    }

    fn check_inputs(&self, inputs: ArrayView2<'_, f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} inputs, batch has {}",
                self.input_dim(),
                inputs.ncols()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Empty("batch has no rows".into()));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    fn forward_layers(&self, inputs: ArrayView2<'_, f64>, upto: usize) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut pre = Vec::with_capacity(upto + 1);
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(upto + 1);
        for layer in &self.layers[..=upto] {
            let input = post.last().map_or(inputs, |a| a.view());
            let z = input.dot(&layer.weights.t()) + &layer.bias;
            post.push(layer.spec.activation.apply(&z));
            pre.push(z);
        }
        (pre, post)
    }

    fn hidden_sample(&self, activations: &Array2<f64>) -> Result<Sample> {
        Sample::new(activations.clone(), self.hidden_bounds())
    }

    /// Full forward pass recording every layer.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
        self.check_inputs(inputs)?;
        let (pre, post) = self.forward_layers(inputs, self.layers.len() - 1);
        let hidden = self.hidden_sample(&post[self.hidden])?;
        Ok(ForwardTrace { pre, post, hidden })
    }

    /// Activations of the regularized layer only.
    pub fn hidden_activations(&self, inputs: ArrayView2<'_, f64>) -> Result<Sample> {
        self.check_inputs(inputs)?;
        let (_, mut post) = self.forward_layers(inputs, self.hidden);
        self.hidden_sample(&post.pop().expect("nonempty"))
    }

    /// Predicted class per row; ties go to the lowest index.
    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let trace = self.forward(inputs)?;
        Ok(argmax_rows(trace.output()))
    }

    /// Fraction of rows whose prediction matches the label.
    pub fn accuracy(&self, sample: &LabeledSample) -> Result<f64> {
        if sample.is_empty() {
            return Err(Error::Empty("cannot score an empty sample".into()));
        }
        let predicted = self.predict(sample.inputs())?;
        let hits = predicted
            .iter()
            .zip(sample.classes())
            .filter(|(p, c)| **p == *c)
            .count();
        Ok(hits as f64 / sample.len() as f64)
    }

    /// Accumulates gradients from `delta` (d loss / d pre-activation of layer
    /// `start`) down to the inputs. `inject` adds an extra term to the
    /// gradient w.r.t. the activations of the given layer on the way down.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        inputs: ArrayView2<'_, f64>,
        pre: &[Array2<f64>],
        post: &[Array2<f64>],
        start: usize,
        mut delta: Array2<f64>,
        inject: Option<(usize, &Array2<f64>)>,
        grads: &mut Gradients,
    ) {
        for l in (0..=start).rev() {
            let a_prev = if l == 0 { inputs } else { post[l - 1].view() };
            grads.weights[l] += &delta.t().dot(&a_prev);
            grads.bias[l] += &delta.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let mut d_post = delta.dot(&self.layers[l].weights);
            if let Some((at, extra)) = inject {
                if at == l - 1 {
                    d_post += extra;
                }
            }
            self.layers[l - 1]
                .spec
                .activation
                .backprop(&mut d_post, &pre[l - 1], &post[l - 1]);
            delta = d_post;
        }
    }

    /// Gradient of the plain classification loss (mean cross-entropy).
    pub fn task_loss_and_grad(&self, source: &LabeledSample) -> Result<(f64, Gradients)> {
        self.check_labels(source)?;
        let trace = self.forward(source.inputs())?;
        let (loss, delta) = cross_entropy(trace.output(), source.labels());
        let mut grads = Gradients::zeros_like(self);
        self.backward(
            source.inputs(),
            &trace.pre,
            &trace.post,
            self.layers.len() - 1,
            delta,
            None,
            &mut grads,
        );
        Ok((loss, grads))
    }

    fn check_labels(&self, source: &LabeledSample) -> Result<()> {
        if source.is_empty() {
            return Err(Error::Empty("source batch is empty".into()));
        }
        if source.num_classes() != self.num_classes() {
            return Err(Error::DimensionMismatch(format!(
                "network has {} classes, labels have {}",
                self.num_classes(),
                source.num_classes()
            )));
        }
        Ok(())
    }

    /// Loss and exact gradient of the domain-regularized objective.
    ///
    /// With `lambda = 0` the regularizer is still evaluated (when a target
    /// batch is given) for diagnostics, but contributes nothing to the
    /// gradient.
    pub fn loss_and_grad(
        &self,
        source: &LabeledSample,
        target_inputs: ArrayView2<'_, f64>,
        spec: &DiscrepancySpec,
    ) -> Result<LossAndGrad> {
        spec.validate()?;
        self.check_labels(source)?;
        let lambda = spec.lambda;
        if target_inputs.nrows() == 0 {
            if lambda > 0.0 {
                return Err(Error::Empty("target batch is empty but lambda > 0".into()));
            }
            let (task_loss, grads) = self.task_loss_and_grad(source)?;
            return Ok(LossAndGrad {
                loss: task_loss,
                task_loss,
                reg_value: 0.0,
                reg_terms: None,
                grads,
            });
        }
        self.check_inputs(target_inputs)?;

        let src = self.forward(source.inputs())?;
        let (tgt_pre, tgt_post) = self.forward_layers(target_inputs, self.hidden);
        let tgt_hidden = self.hidden_sample(&tgt_post[self.hidden])?;

        let (task_loss, delta) = cross_entropy(src.output(), source.labels());
        let DiscrepancyValue {
            value: reg_value,
            per_term,
        } = spec.kind.value(&src.hidden, &tgt_hidden)?;

        let mut grads = Gradients::zeros_like(self);
        let top = self.layers.len() - 1;
        if lambda > 0.0 {
            let (g_src, g_tgt) = spec.kind.grad_pair(&src.hidden, &tgt_hidden)?;
            let g_src = g_src * lambda;
            let mut g_tgt = g_tgt * lambda;
            self.backward(
                source.inputs(),
                &src.pre,
                &src.post,
                top,
                delta,
                Some((self.hidden, &g_src)),
                &mut grads,
            );
            let h = self.hidden;
            self.layers[h]
                .spec
                .activation
                .backprop(&mut g_tgt, &tgt_pre[h], &tgt_post[h]);
            self.backward(target_inputs, &tgt_pre, &tgt_post, h, g_tgt, None, &mut grads);
        } else {
            self.backward(source.inputs(), &src.pre, &src.post, top, delta, None, &mut grads);
        }

        Ok(LossAndGrad {
            loss: task_loss + lambda * reg_value,
            task_loss,
            reg_value,
            reg_terms: per_term,
            grads,
        })
    }

    /// Scalar objective without gradients.
    pub fn loss(
        &self,
        source: &LabeledSample,
        target_inputs: ArrayView2<'_, f64>,
        spec: &DiscrepancySpec,
    ) -> Result<f64> {
        spec.validate()?;
        self.check_labels(source)?;
        let src = self.forward(source.inputs())?;
        let (task_loss, _) = cross_entropy(src.output(), source.labels());
        if target_inputs.nrows() == 0 || spec.lambda == 0.0 {
            return Ok(task_loss);
        }
        let tgt = self.hidden_activations(target_inputs)?;
        Ok(task_loss + spec.lambda * spec.kind.value(&src.hidden, &tgt)?.value)
    }
}

/// Mean clamped cross-entropy and its gradient w.r.t. the softmax logits.
fn cross_entropy(probs: &Array2<f64>, labels: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let n = probs.nrows() as f64;
    let loss =
        -ndarray::Zip::from(probs).and(labels).fold(
            0.0,
            |acc, &p, &y| if y != 0.0 { acc + y * p.max(LOG_CLAMP).ln() } else { acc },
        ) / n;
    let delta = (probs - &labels) / n;
    (loss, delta)
}

pub(crate) fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
