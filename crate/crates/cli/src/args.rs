use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use moment_match::adaptation::SweepAxis;
use moment_match::network::Activation;
use moment_match::samples::ShiftKind;
use moment_match::Bounds;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "moment-match",
    version,
    about = "Moment-matching domain regularizers: discrepancies, training, sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discrepancy between two dense CSV samples.
    Discrepancy(DiscrepancyArgs),
    /// Train one regularized network and report target accuracy.
    Train(TrainArgs),
    /// Parameter sensitivity sweep over tasks and seeds.
    Sweep(SweepArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Dump hidden activations of both domains after training.
    Activations(ActivationsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Cmd,
    Mmd,
    Mkl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Adadelta,
    Adagrad,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Dense,
    Sparse,
}

/// `kind:magnitude`, e.g. `shift:0.8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTask {
    pub kind: ShiftKind,
    pub magnitude: f64,
}

impl FromStr for SyntheticTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, mag) = s
            .split_once(':')
            .ok_or_else(|| format!("expected KIND:MAGNITUDE, got {s:?}"))?;
        let kind = kind.parse::<ShiftKind>().map_err(|e| e.to_string())?;
        let magnitude = mag
            .parse::<f64>()
            .ok()
            .filter(|m| m.is_finite())
            .ok_or_else(|| format!("invalid magnitude {mag:?}"))?;
        Ok(Self { kind, magnitude })
    }
}

impl fmt::Display for SyntheticTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ShiftKind::Shift => "shift",
            ShiftKind::Rotation => "rotation",
        };
        write!(f, "{kind}:{}", self.magnitude)
    }
}

/// `sigmoid`, `tanh` or `clipped_relu:LO:HI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationArg(pub Activation);

impl FromStr for ActivationArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split(':');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("sigmoid"), None, ..) => Ok(Self(Activation::Sigmoid)),
            (Some("tanh"), None, ..) => Ok(Self(Activation::Tanh)),
            (Some("clipped_relu"), Some(lo), Some(hi), None) => {
                let lo = lo.parse().map_err(|_| format!("invalid clip bound {lo:?}"))?;
                let hi = hi.parse().map_err(|_| format!("invalid clip bound {hi:?}"))?;
                Ok(Self(Activation::ClippedRelu { lo, hi }))
            }
            _ => Err(format!(
                "unknown activation {s:?} (sigmoid, tanh or clipped_relu:LO:HI)"
            )),
        }
    }
}

/// `LO,HI` box for discrepancy inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsArg(pub Bounds);

impl FromStr for BoundsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("invalid bound {v:?}"));
        Bounds::new(parse(lo)?, parse(hi)?).map(Self).map_err(|e| e.to_string())
    }
}

/// Where the domains come from: synthetic tasks or three files.
#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("data").required(true).multiple(true).args(["synthetic", "source"])))]
pub struct DatasetArgs {
    /// Synthetic task `shift:M` or `rotation:M`; repeatable for sweeps.
    #[arg(long, value_name = "KIND:MAGNITUDE", conflicts_with = "source")]
    pub synthetic: Vec<SyntheticTask>,
    /// Labeled source file.
    #[arg(long, requires_all = ["target", "target_test"])]
    pub source: Option<PathBuf>,
    /// Unlabeled target file (a label column, if present, is ignored).
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    /// Labeled target file used only for the final accuracy.
    #[arg(long, requires = "source")]
    pub target_test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Dense)]
    pub format: Format,
    /// Input dimension for sparse files.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Label column of dense files, by header name or 0-based index.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Sparse files count feature indices from 1.
    #[arg(long)]
    pub one_based: bool,
    #[arg(long, default_value_t = 1000)]
    pub n_source: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_target: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    /// Seed for synthetic data; defaults to --seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
}

/// Network, regularizer and optimizer settings.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Measure::Cmd)]
    pub discrepancy: Measure,
    /// Number of moment orders for cmd.
    #[arg(long = "K", default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Gaussian kernel width for mmd.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value = "sigmoid")]
    pub activation: ActivationArg,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adadelta)]
    pub optimizer: OptimizerArg,
    /// Learning rate for adagrad (default 0.01) and sgd (required).
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw source batches without class balancing.
    #[arg(long)]
    pub no_balance: bool,
}

#[derive(Debug, Args)]
pub struct DiscrepancyArgs {
    pub x: PathBuf,
    pub y: PathBuf,
    #[arg(long, value_enum, default_value_t = Measure::Cmd)]
    pub measure: Measure,
    #[arg(long = "K", default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Box `[lo, hi]` containing every entry.
    #[arg(long, value_name = "LO,HI", default_value = "0,1")]
    pub bounds: BoundsArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory for history.csv and result.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write the trained network as a JSON checkpoint.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// K, lambda, beta or hidden_nodes.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "log_values",
        conflicts_with = "log_values"
    )]
    pub values: Vec<f64>,
    /// Log-spaced grid `LO,HI,COUNT`.
    #[arg(long, value_name = "LO,HI,COUNT")]
    pub log_values: Option<String>,
    /// Value the ratios are normalized by (defaults: K 5, lambda 1, beta 1).
    #[arg(long)]
    pub reference: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// cmd, mmd, mkl or all.
    #[arg(long, default_value = "all")]
    pub measure: String,
    #[arg(long = "K", default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Rows of X (and batch size with --network).
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Rows of Y; defaults to --n.
    #[arg(long)]
    pub m: Option<usize>,
    /// Input dimension.
    #[arg(long = "N", default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    /// Check the full regularized network objective instead.
    #[arg(long)]
    pub network: bool,
    #[arg(long, default_value = "sigmoid")]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
}

#[derive(Debug, Args)]
pub struct ActivationsArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use a saved checkpoint instead of training.
    #[arg(long)]
    pub model_path: Option<PathBuf>,
    /// Directory for source_activations.csv and target_activations.csv.
    #[arg(long)]
    pub out: PathBuf,
}
