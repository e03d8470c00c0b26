//! Bounded samples, labeled datasets, file ingestion and synthetic domain pairs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The compact interval `[lo, hi]` every coordinate of a [`Sample`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lo: f64,
    hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidBounds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `|hi - lo|`, the normalizer of every CMD term.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// An `n x N` matrix of points known to lie in `bounds^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Array2<f64>,
    bounds: Bounds,
}

impl Sample {
    /// Validates shape and range. Out-of-range entries are rejected, never clamped.
    pub fn new(data: Array2<f64>, bounds: Bounds) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty(format!(
                "sample must have at least one row and one column, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        for ((row, col), &value) in data.indexed_iter() {
            if !bounds.contains(value) {
                return Err(Error::OutOfBounds {
                    row,
                    col,
                    value,
                    lo: bounds.lo,
                    hi: bounds.hi,
                });
            }
        }
        Ok(Self { data, bounds })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Number of points `n`.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of coordinates `N`.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Empirical expectation vector.
    pub fn mean(&self) -> Array1<f64> {
        self.data.mean_axis(Axis(0)).expect("sample is nonempty")
    }
}

/// Inputs with one-hot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    inputs: Array2<f64>,
    labels: Array2<f64>,
}

impl LabeledSample {
    pub fn new(inputs: Array2<f64>, labels: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != labels.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} input rows but {} label rows",
                inputs.nrows(),
                labels.nrows()
            )));
        }
        for (i, row) in labels.outer_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidLabel(format!("row {i} is not one-hot")));
            }
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labeled sample inputs".into()));
        }
        Ok(Self { inputs, labels })
    }

    /// Builds one-hot labels from class indices in `0..num_classes`.
    pub fn from_classes(inputs: Array2<f64>, classes: &[usize], num_classes: usize) -> Result<Self> {
        if let Some(&bad) = classes.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidLabel(format!("class {bad} outside 0..{num_classes}")));
        }
        let mut labels = Array2::zeros((classes.len(), num_classes));
        for (i, &c) in classes.iter().enumerate() {
            labels[[i, c]] = 1.0;
        }
        Self::new(inputs, labels)
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, f64> {
        self.labels.view()
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.ncols()
    }

    /// Class index of every row.
    pub fn classes(&self) -> Vec<usize> {
        self.labels
            .outer_iter()
            .map(|row| row.iter().position(|&v| v == 1.0).expect("one-hot row"))
            .collect()
    }

    /// Rows selected by index, in the given order (repeats allowed).
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select(Axis(0), rows),
            labels: self.labels.select(Axis(0), rows),
        }
    }
}

/// The unsupervised adaptation contract: labeled source, unlabeled target,
/// and a labeled target test split that training never sees.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub name: String,
    pub source: LabeledSample,
    pub target_unlabeled: Array2<f64>,
    pub target_test: LabeledSample,
}

impl DomainDataset {
    pub fn new(
        name: impl Into<String>,
        source: LabeledSample,
        target_unlabeled: Array2<f64>,
        target_test: LabeledSample,
    ) -> Result<Self> {
        let dim = source.input_dim();
        if target_unlabeled.ncols() != dim || target_test.input_dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "source has {dim} inputs, target {}, target test {}",
                target_unlabeled.ncols(),
                target_test.input_dim()
            )));
        }
        if target_test.num_classes() != source.num_classes() {
            return Err(Error::DimensionMismatch(format!(
                "source has {} classes, target test {}",
                source.num_classes(),
                target_test.num_classes()
            )));
        }
        if source.is_empty() || target_unlabeled.nrows() == 0 {
            return Err(Error::Empty("source and target must be nonempty".into()));
        }
        if target_unlabeled.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target inputs".into()));
        }
        Ok(Self {
            name: name.into(),
            source,
            target_unlabeled,
            target_test,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.source.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.source.num_classes()
    }
}

/// Result of reading a dense CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseCsv {
    Matrix(Array2<f64>),
    /// `class_ids[c]` is the raw label that one-hot column `c` stands for.
    Labeled {
        sample: LabeledSample,
        class_ids: Vec<i64>,
    },
}

impl DenseCsv {
    /// The feature matrix, discarding labels if present.
    pub fn into_inputs(self) -> Array2<f64> {
        match self {
            DenseCsv::Matrix(m) => m,
            DenseCsv::Labeled { sample, .. } => sample.inputs,
        }
    }
}

/// Reads a comma-separated numeric file.
///
/// A first row containing any non-numeric cell is treated as a header.
/// Lines starting with `#` are comments. With `label_column`, that column
/// must hold integer class ids; they are one-hot encoded over the observed
/// ids sorted ascending. With `bounds`, every feature must lie in range.
pub fn load_dense_csv(path: impl AsRef<Path>, label_column: Option<&str>, bounds: Option<Bounds>) -> Result<DenseCsv> {
    let path = path.as_ref();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    line,
                    format!("ragged row: expected {w} cells, found {}", record.len()),
                ));
            }
            Some(_) => {}
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push((line, values)),
            Err(_) if header.is_none() && rows.is_empty() => {
                header = Some(record.iter().map(str::to_owned).collect());
            }
            Err(_) => {
                let bad = record.iter().find(|c| c.parse::<f64>().is_err()).unwrap_or_default();
                return Err(parse_err(line, format!("non-numeric cell {bad:?}")));
            }
        }
    }
    let width = match width {
        Some(w) if !rows.is_empty() => w,
        _ => return Err(parse_err(0, "empty file".into())),
    };

    let label_idx = match label_column {
        None => None,
        Some(name) => {
            let found = header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < width));
            match found {
                Some(i) => Some(i),
                None => return Err(parse_err(0, format!("unknown label column {name:?}"))),
            }
        }
    };

    let n_features = width - usize::from(label_idx.is_some());
    if n_features == 0 {
        return Err(parse_err(0, "no feature columns".into()));
    }
    let mut features = Array2::zeros((rows.len(), n_features));
    let mut ids = Vec::with_capacity(rows.len());
    for (r, (line, values)) in rows.iter().enumerate() {
        let mut c = 0;
        for (j, &v) in values.iter().enumerate() {
            if Some(j) == label_idx {
                if v.fract() != 0.0 || !v.is_finite() {
                    return Err(parse_err(*line, format!("label {v} is not an integer")));
                }
                ids.push(v as i64);
            } else {
                if !v.is_finite() {
                    return Err(parse_err(*line, format!("non-finite cell {v}")));
                }
                features[[r, c]] = v;
                c += 1;
            }
        }
    }
    if let Some(b) = bounds {
        Sample::new(features.clone(), b)?;
    }
    if label_idx.is_none() {
        return Ok(DenseCsv::Matrix(features));
    }
    let observed: Vec<i64> = ids.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let classes: Vec<usize> = ids
        .iter()
        .map(|id| observed.binary_search(id).expect("observed id"))
        .collect();
    let sample = LabeledSample::from_classes(features, &classes, observed.len())?;
    Ok(DenseCsv::Labeled {
        sample,
        class_ids: observed,
    })
}

/// Whether sparse feature indices count from 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IndexBase {
    #[default]
    Zero,
    One,
}

impl IndexBase {
    fn offset(self) -> usize {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

/// Reads `<label> <idx>:<val> ...` lines into a dense matrix with binary
/// one-hot labels.
pub fn load_sparse_bow(path: impl AsRef<Path>, dim: usize, base: IndexBase) -> Result<LabeledSample> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_sparse_bow(&text, dim, base).map_err(|(line, msg)| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    })
}

/// In-memory form of [`load_sparse_bow`]; errors carry the 1-based line.
pub fn parse_sparse_bow(
    text: &str,
    dim: usize,
    base: IndexBase,
) -> std::result::Result<LabeledSample, (usize, String)> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut classes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut tokens = raw.split_whitespace();
        let label = tokens.next().expect("nonempty line");
        let class = match label {
            "0" => 0,
            "1" => 1,
            other => return Err((line, format!("label {other:?} is not 0 or 1"))),
        };
        let mut seen = BTreeSet::new();
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| (line, format!("malformed pair {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| (line, format!("malformed index in {tok:?}")))?;
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| (line, format!("malformed value in {tok:?}")))?;
            let col = idx
                .checked_sub(base.offset())
                .ok_or_else(|| (line, format!("index {idx} below index base")))?;
            if col >= dim {
                return Err((line, format!("index {idx} out of range for dim {dim}")));
            }
            if !seen.insert(col) {
                return Err((line, format!("duplicate index {idx}")));
            }
            entries.push((col, val));
        }
        rows.push(entries);
        classes.push(class);
    }
    let mut inputs = Array2::zeros((rows.len(), dim));
    for (r, entries) in rows.iter().enumerate() {
        for &(c, v) in entries {
            inputs[[r, c]] = v;
        }
    }
    LabeledSample::from_classes(inputs, &classes, 2).map_err(|e| (0, e.to_string()))
}

/// Inverse of [`parse_sparse_bow`] for two-class samples; zero entries are omitted.
pub fn write_sparse_bow(sample: &LabeledSample, base: IndexBase) -> Result<String> {
    if sample.num_classes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "sparse format holds binary labels, sample has {} classes",
            sample.num_classes()
        )));
    }
    let mut out = String::new();
    for (row, class) in sample.inputs.outer_iter().zip(sample.classes()) {
        write!(out, "{class}").unwrap();
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{v:?}", j + base.offset()).unwrap();
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// How the target domain is derived from the source process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    /// Translate every point by `(m, m)`.
    Shift,
    /// Rotate about the origin by `m` radians.
    Rotation,
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift" => Ok(ShiftKind::Shift),
            "rotation" => Ok(ShiftKind::Rotation),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic kind {other:?} (expected shift or rotation)"
            ))),
        }
    }
}

const CLUSTER_SIGMA: f64 = 0.5;

fn draw_clusters(rng: &mut ChaCha8Rng, n: usize) -> (Array2<f64>, Vec<usize>) {
    let noise = Normal::new(0.0, CLUSTER_SIGMA).expect("valid sigma");
    let mut points = Array2::zeros((n, 2));
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let class = usize::from(rng.random_bool(0.5));
        let cx = if class == 0 { -1.0 } else { 1.0 };
        points[[i, 0]] = cx + noise.sample(rng);
        points[[i, 1]] = noise.sample(rng);
        classes.push(class);
    }
    (points, classes)
}

fn transform(points: &mut Array2<f64>, kind: ShiftKind, magnitude: f64) {
    match kind {
        ShiftKind::Shift => points.mapv_inplace(|v| v + magnitude),
        ShiftKind::Rotation => {
            let (s, c) = magnitude.sin_cos();
            for mut row in points.outer_iter_mut() {
                let (x, y) = (row[0], row[1]);
                row[0] = c * x - s * y;
                row[1] = s * x + c * y;
            }
        }
    }
}

/// Two Gaussian class clusters at `(-1, 0)` and `(1, 0)` (sigma 0.5) as the
/// source; the target is the same process shifted or rotated by `magnitude`.
pub fn make_synthetic_pair(
    kind: ShiftKind,
    magnitude: f64,
    n_source: usize,
    n_target: usize,
    n_test: usize,
    seed: u64,
) -> Result<DomainDataset> {
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "magnitude must be finite and >= 0, got {magnitude}"
        )));
    }
    if n_source == 0 || n_target == 0 || n_test == 0 {
        return Err(Error::InvalidArgument("sample counts must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (source_x, source_y) = draw_clusters(&mut rng, n_source);
    let (mut target_x, _) = draw_clusters(&mut rng, n_target);
    let (mut test_x, test_y) = draw_clusters(&mut rng, n_test);
    transform(&mut target_x, kind, magnitude);
    transform(&mut test_x, kind, magnitude);

    let name = match kind {
        ShiftKind::Shift => format!("shift:{magnitude}"),
        ShiftKind::Rotation => format!("rotation:{magnitude}"),
    };
    DomainDataset::new(
        name,
        LabeledSample::from_classes(source_x, &source_y, 2)?,
        target_x,
        LabeledSample::from_classes(test_x, &test_y, 2)?,
    )
}

/// Draws `size` rows with per-class counts differing by at most one.
///
/// A class that has at least its quota of rows is sampled without
/// replacement; a class that must grow contributes all its rows plus extra
/// draws with replacement. The result is shuffled.
pub fn resample_source_balanced(source: &LabeledSample, size: usize, seed: u64) -> Result<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = balanced_indices(source, size, &mut rng)?;
    Ok(source.select(&rows))
}

pub(crate) fn balanced_indices(source: &LabeledSample, size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let num_classes = source.num_classes();
    if size < num_classes {
        return Err(Error::InvalidArgument(format!(
            "balanced size {size} is smaller than the class count {num_classes}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, c) in source.classes().into_iter().enumerate() {
        by_class[c].push(i);
    }
    if let Some(missing) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::MissingClass(missing));
    }

    // The remainder goes to randomly chosen classes so no class is favored.
    let mut order: Vec<usize> = (0..num_classes).collect();
    order.shuffle(rng);
    let mut quota = vec![size / num_classes; num_classes];
    for &c in order.iter().take(size % num_classes) {
        quota[c] += 1;
    }

    let mut picked = Vec::with_capacity(size);
    for (members, &want) in by_class.iter_mut().zip(&quota) {
        members.shuffle(rng);
        if want <= members.len() {
            picked.extend_from_slice(&members[..want]);
        } else {
            picked.extend_from_slice(members);
            for _ in members.len()..want {
                picked.push(members[rng.random_range(0..members.len())]);
            }
        }
    }
    picked.shuffle(rng);
    Ok(picked)
}
