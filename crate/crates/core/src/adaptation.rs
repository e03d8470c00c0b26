//! Unsupervised domain-adaptation training, reverse cross-validation and
//! parameter sensitivity sweeps.
//!
//! Training only ever sees the labeled source sample and the unlabeled
//! target inputs; the labeled target test split is read once, after the
//! last epoch, to report accuracy.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{DiscrepancyKind, DiscrepancySpec};
use crate::error::{Error, Result};
use crate::network::{single_hidden_layer, Activation, LayerSpec, NetworkState};
use crate::optim::{OptimizerKind, OptimizerState};
use crate::samples::{balanced_indices, DomainDataset, LabeledSample};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_HIDDEN: usize = 16;

// Independent ChaCha stream for batch shuffling, so weight init and data
// order never share random draws.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layers: Vec<LayerSpec>,
    pub discrepancy: DiscrepancySpec,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub balance_source: bool,
}

impl TrainConfig {
    /// A single sigmoid hidden layer regularized with `CMD_5`, `lambda = 1`,
    /// trained with Adadelta.
    pub fn new(inputs: usize, classes: usize, seed: u64) -> Self {
        Self {
            layers: single_hidden_layer(inputs, DEFAULT_HIDDEN, classes, Activation::Sigmoid),
            discrepancy: DiscrepancySpec {
                kind: DiscrepancyKind::Cmd { k: DEFAULT_K },
                lambda: DEFAULT_LAMBDA,
            },
            optimizer: OptimizerKind::adadelta(),
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed,
            balance_source: true,
        }
    }

    pub fn with_discrepancy(mut self, discrepancy: DiscrepancySpec) -> Self {
        self.discrepancy = discrepancy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        crate::network::validate_specs(&self.layers)?;
        self.discrepancy.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-size weighted mean over the epoch.
    pub task_loss: f64,
    /// Batch-size weighted mean over the epoch; reported even when `lambda = 0`.
    pub reg_value: f64,
    /// Accuracy on the full source sample after the epoch.
    pub source_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub state: NetworkState,
    pub history: Vec<EpochRecord>,
    pub target_test_accuracy: f64,
}

/// Trains on `dataset.source` and `dataset.target_unlabeled`, then scores
/// the final model on `dataset.target_test`.
pub fn train(dataset: &DomainDataset, config: &TrainConfig) -> Result<RunResult> {
    let (state, history) = fit(&dataset.source, dataset.target_unlabeled.view(), config, None)?;
    let target_test_accuracy = state.accuracy(&dataset.target_test)?;
    Ok(RunResult {
        state,
        history,
        target_test_accuracy,
    })
}

/// Number of paired mini-batches per epoch.
pub fn batches_per_epoch(n_source: usize, n_target: usize, batch_size: usize) -> usize {
    n_source.min(n_target).div_ceil(batch_size)
}

/// The training loop. Starts from `init` when given, otherwise from a fresh
/// network seeded with `config.seed`.
///
/// Each epoch reshuffles both domains and walks `ceil(min(n_s, n_t) / b)`
/// paired batches. With `balance_source`, each source batch is instead a
/// fresh class-balanced draw from the whole source sample; if the final
/// partial batch is smaller than the class count, the balanced draw is
/// padded up to one row per class.
pub fn fit(
    source: &LabeledSample,
    target: ArrayView2<'_, f64>,
    config: &TrainConfig,
    init: Option<NetworkState>,
) -> Result<(NetworkState, Vec<EpochRecord>)> {
    config.validate()?;
    let mut state = match init {
        Some(s) => {
            if s.specs() != config.layers {
                return Err(Error::InvalidArgument(
                    "initial network does not match the configured layers".into(),
                ));
            }
            s
        }
        None => NetworkState::init(&config.layers, config.seed)?,
    };
    if source.input_dim() != state.input_dim() || target.ncols() != state.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "network expects {} inputs; source has {}, target {}",
            state.input_dim(),
            source.input_dim(),
            target.ncols()
        )));
    }
    if source.num_classes() != state.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "network has {} classes, source labels {}",
            state.num_classes(),
            source.num_classes()
        )));
    }
    if source.is_empty() || target.nrows() == 0 {
        return Err(Error::Empty("training needs source and target examples".into()));
    }

    let mut opt = OptimizerState::new(config.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let (ns, nt) = (source.len(), target.nrows());
    let paired = ns.min(nt);
    let b = config.batch_size;
    let mut src_order: Vec<usize> = (0..ns).collect();
    let mut tgt_order: Vec<usize> = (0..nt).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        src_order.shuffle(&mut rng);
        tgt_order.shuffle(&mut rng);
        let (mut task_sum, mut reg_sum) = (0.0, 0.0);
        for step in 0..batches_per_epoch(ns, nt, b) {
            let lo = step * b;
            let hi = (lo + b).min(paired);
            let tgt_batch = target.select(Axis(0), &tgt_order[lo..hi]);
            let src_batch = if config.balance_source {
                let size = (hi - lo).max(source.num_classes());
                source.select(&balanced_indices(source, size, &mut rng)?)
            } else {
                source.select(&src_order[lo..hi])
            };
            let out = state.loss_and_grad(&src_batch, tgt_batch.view(), &config.discrepancy)?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    what: "loss",
                });
            }
            let grads = out.grads.slices();
            if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    what: "gradient",
                });
            }
            opt.step(&mut state.param_slices_mut(), &grads)?;
            if state
                .param_slices_mut()
                .iter()
                .any(|p| p.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    what: "parameters",
                });
            }
            let w = (hi - lo) as f64;
            task_sum += w * out.task_loss;
            reg_sum += w * out.reg_value;
        }
        history.push(EpochRecord {
            epoch,
            task_loss: task_sum / paired as f64,
            reg_value: reg_sum / paired as f64,
            source_accuracy: state.accuracy(source)?,
        });
    }
    Ok((state, history))
}

/// Seeded, class-stratified split; returns `(train, validation)` row indices.
fn stratified_split(sample: &LabeledSample, validation_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); sample.num_classes()];
    for (i, c) in sample.classes().into_iter().enumerate() {
        by_class[c].push(i);
    }
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (class, mut rows) in by_class.into_iter().enumerate() {
        let take = (rows.len() as f64 * validation_fraction).floor() as usize;
        if take < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} source examples; reverse validation needs at least 2 held out per class",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        valid.extend_from_slice(&rows[..take]);
        train.extend_from_slice(&rows[take..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

pub const REVERSE_CV_VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseCvOutcome {
    pub best: DiscrepancySpec,
    pub best_index: usize,
    /// One reverse-validation accuracy per grid entry.
    pub scores: Vec<f64>,
}

/// Scores one candidate: forward model source-train -> target, self-label
/// the target, train a reverse model (initialized from the forward weights)
/// target -> source-train, and measure it on held-out source labels.
fn reverse_score(
    train: &LabeledSample,
    valid: &LabeledSample,
    target: ArrayView2<'_, f64>,
    config: &TrainConfig,
) -> Result<f64> {
    let (forward, _) = fit(train, target, config, None)?;
    let pseudo = forward.predict(target)?;
    let reverse_source = LabeledSample::from_classes(target.to_owned(), &pseudo, train.num_classes())?;
    let mut reverse_config = config.clone();
    let mut seen = vec![false; train.num_classes()];
    pseudo.iter().for_each(|&c| seen[c] = true);
    if seen.contains(&false) {
        // balancing needs every class among the self-labels
        reverse_config.balance_source = false;
    }
    let (reverse, _) = fit(&reverse_source, train.inputs(), &reverse_config, Some(forward))?;
    reverse.accuracy(valid)
}

/// Picks the grid entry with the best reverse-validation score (ties go
/// to the earlier entry). Never reads `dataset.target_test`.
pub fn reverse_cross_validate(
    dataset: &DomainDataset,
    base: &TrainConfig,
    grid: &[DiscrepancySpec],
) -> Result<ReverseCvOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("reverse cross-validation grid is empty".into()));
    }
    base.validate()?;
    for spec in grid {
        spec.validate()?;
    }
    let source = &dataset.source;
    let (train_rows, valid_rows) = stratified_split(source, REVERSE_CV_VALIDATION_FRACTION, base.seed)?;
    let train = source.select(&train_rows);
    let valid = source.select(&valid_rows);
    let target = dataset.target_unlabeled.view();

    let scores = crate::par::map(grid, |spec| {
        let config = base.clone().with_discrepancy(*spec);
        reverse_score(&train, &valid, target, &config)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_index] {
            best_index = i;
        }
    }
    Ok(ReverseCvOutcome {
        best: grid[best_index],
        best_index,
        scores,
    })
}

/// `count` values spaced evenly in log scale over `[lo, hi]`; the endpoints are exact.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut grid: Vec<f64> = (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect();
            grid[0] = lo;
            grid[count - 1] = hi;
            grid
        }
    }
}

/// The MMD tuning grid: 10 log-spaced `lambda` in `[0.1, 500]` times 10
/// log-spaced `beta` in `[0.01, 10]`.
pub fn mmd_tuning_grid() -> Vec<DiscrepancySpec> {
    let lambdas = log_grid(0.1, 500.0, 10);
    let betas = log_grid(0.01, 10.0, 10);
    lambdas
        .iter()
        .flat_map(|&lambda| {
            betas.iter().map(move |&beta| DiscrepancySpec {
                kind: DiscrepancyKind::Mmd { beta },
                lambda,
            })
        })
        .collect()
}

/// Which hyperparameter a sensitivity sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "K")]
    K,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "hidden_nodes")]
    HiddenNodes,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "K",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Beta => "beta",
            SweepAxis::HiddenNodes => "hidden_nodes",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(SweepAxis::K),
            "lambda" => Ok(SweepAxis::Lambda),
            "beta" => Ok(SweepAxis::Beta),
            "hidden_nodes" | "hidden" => Ok(SweepAxis::HiddenNodes),
            other => Err(Error::InvalidArgument(format!("unknown sweep axis {other:?}"))),
        }
    }
}

fn as_count(axis: SweepAxis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value.is_finite() {
        Ok(value as usize)
    } else {
        Err(Error::InvalidArgument(format!(
            "{axis} values must be positive integers, got {value}"
        )))
    }
}

impl SweepAxis {
    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut config = base.clone();
        match self {
            SweepAxis::K => match &mut config.discrepancy.kind {
                DiscrepancyKind::Cmd { k } => *k = as_count(self, value)?,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "axis K requires the cmd measure, configured measure is {}",
                        other.name()
                    )))
                }
            },
            SweepAxis::Beta => match &mut config.discrepancy.kind {
                DiscrepancyKind::Mmd { beta } => *beta = value,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "axis beta requires the mmd measure, configured measure is {}",
                        other.name()
                    )))
                }
            },
            SweepAxis::Lambda => config.discrepancy.lambda = value,
            SweepAxis::HiddenNodes => {
                let width = as_count(self, value)?;
                let h = crate::network::validate_specs(&config.layers)?;
                config.layers[h].out_dim = width;
                config.layers[h + 1].in_dim = width;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub task: String,
    pub seed: u64,
    pub accuracy: f64,
    /// Accuracy relative to the reference value (or, on the hidden-nodes
    /// axis, to the unregularized model of the same width) for this task and seed.
    pub ratio: f64,
    /// Source-only accuracy, recorded on the hidden-nodes axis.
    pub baseline_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub reference: f64,
    pub tasks: Vec<String>,
    pub seeds: Vec<u64>,
    /// Ordered task-major, then value, then seed.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    fn cells_for(&self, task: &str, value: f64) -> impl Iterator<Item = &SweepCell> {
        let task = task.to_owned();
        self.cells.iter().filter(move |c| c.task == task && c.value == value)
    }

    /// Mean accuracy over seeds.
    pub fn mean_accuracy(&self, task: &str, value: f64) -> Option<f64> {
        mean(self.cells_for(task, value).map(|c| c.accuracy))
    }

    /// Ratio of seed-averaged accuracies: `mean acc(value) / mean acc(reference)`,
    /// or regularized over source-only on the hidden-nodes axis.
    pub fn mean_ratio(&self, task: &str, value: f64) -> Option<f64> {
        let num = self.mean_accuracy(task, value)?;
        let den = match self.axis {
            SweepAxis::HiddenNodes => mean(self.cells_for(task, value).filter_map(|c| c.baseline_accuracy))?,
            _ => self.mean_accuracy(task, self.reference)?,
        };
        Some(num / den)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Trains one model per (task, value, seed) and normalizes accuracies.
///
/// Cells run in parallel when the `parallel` feature is enabled; results
/// are identical either way.
pub fn sensitivity_sweep(
    tasks: &[DomainDataset],
    base: &TrainConfig,
    axis: SweepAxis,
    values: &[f64],
    reference: f64,
    seeds: &[u64],
) -> Result<SweepResult> {
    if tasks.is_empty() || values.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs tasks, values and seeds".into()));
    }
    if !values.contains(&reference) {
        return Err(Error::InvalidArgument(format!(
            "reference {reference} is not among the sweep values"
        )));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize, u64)> = (0..tasks.len())
        .flat_map(|t| (0..values.len()).flat_map(move |v| seeds.iter().map(move |&s| (t, v, s))))
        .collect();
    let outcomes = crate::par::map(&jobs, |&(t, v, seed)| -> Result<(f64, Option<f64>)> {
        let config = configs[v].clone().with_seed(seed);
        let acc = train(&tasks[t], &config)?.target_test_accuracy;
        let baseline = if axis == SweepAxis::HiddenNodes {
            let mut plain = config;
            plain.discrepancy.lambda = 0.0;
            Some(train(&tasks[t], &plain)?.target_test_accuracy)
        } else {
            None
        };
        Ok((acc, baseline))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let ref_index = values.iter().position(|&v| v == reference).expect("checked above");
    let index = |t: usize, v: usize, s: usize| (t * values.len() + v) * seeds.len() + s;
    let mut cells = Vec::with_capacity(jobs.len());
    for (t, task) in tasks.iter().enumerate() {
        for (v, &value) in values.iter().enumerate() {
            for (s, &seed) in seeds.iter().enumerate() {
                let (accuracy, baseline) = outcomes[index(t, v, s)];
                let ratio = match baseline {
                    Some(b) => accuracy / b,
                    None => accuracy / outcomes[index(t, ref_index, s)].0,
                };
                cells.push(SweepCell {
                    value,
                    task: task.name.clone(),
                    seed,
                    accuracy,
                    ratio,
                    baseline_accuracy: baseline,
                });
            }
        }
    }
    Ok(SweepResult {
        axis,
        values: values.to_vec(),
        reference,
        tasks: tasks.iter().map(|t| t.name.clone()).collect(),
        seeds: seeds.to_vec(),
        cells,
    })
}

/// Hidden activations of both training domains under a trained model.
pub fn domain_activations(state: &NetworkState, dataset: &DomainDataset) -> Result<(Array2<f64>, Array2<f64>)> {
    let source = state.hidden_activations(dataset.source.inputs())?.into_data();
    let target = state.hidden_activations(dataset.target_unlabeled.view())?.into_data();
    Ok((source, target))
}
