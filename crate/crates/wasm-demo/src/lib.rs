//! Browser bindings: discrepancies between two samples drawn in JS, and a
//! small synthetic adaptation run with its decision surface.
//!
//! Results cross the boundary as JSON strings.

use moment_match::adaptation::{train, TrainConfig};
use moment_match::discrepancy::{cmd_k, cmd_term_bound, mkl, mmd2};
use moment_match::samples::{make_synthetic_pair, ShiftKind};
use moment_match::{Bounds, DiscrepancySpec, Sample};
use ndarray::Array2;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct Comparison {
    cmd: f64,
    per_term: Vec<f64>,
    term_bounds: Vec<f64>,
    mmd2: f64,
    mkl: f64,
}

/// Compares two 1-D samples on `[0, 1]`: CMD with its per-order terms and
/// their worst-case bounds, Gaussian MMD and mean KL.
#[wasm_bindgen]
pub fn compare(x: &[f64], y: &[f64], k: usize, beta: f64) -> Result<String, JsValue> {
    let column = |v: &[f64]| {
        Array2::from_shape_vec((v.len(), 1), v.to_vec())
            .map_err(js_err)
            .and_then(|a| Sample::new(a, Bounds::unit()).map_err(js_err))
    };
    let (xs, ys) = (column(x)?, column(y)?);
    let cmd = cmd_k(&xs, &ys, k).map_err(js_err)?;
    let term_bounds = (1..=k)
        .map(|order| cmd_term_bound(order, 1))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js_err)?;
    let out = Comparison {
        cmd: cmd.value,
        per_term: cmd.per_term.unwrap_or_default(),
        term_bounds,
        mmd2: mmd2(&xs, &ys, beta).map_err(js_err)?,
        mkl: mkl(&xs, &ys).map_err(js_err)?,
    };
    serde_json::to_string(&out).map_err(js_err)
}

const GRID: usize = 48;
const EXTENT: f64 = 3.5;
const POINTS_SHOWN: usize = 300;

#[derive(Serialize)]
struct Run {
    target_test_accuracy: f64,
    task_loss: Vec<f64>,
    reg_value: Vec<f64>,
    /// Class-1 probability on a `grid x grid` lattice over `[-extent, extent]^2`, row-major from the top.
    surface: Vec<f64>,
    grid: usize,
    extent: f64,
    source: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
}

/// Trains on a synthetic task (`kind` is `shift` or `rotation`) and returns
/// accuracy, per-epoch losses, the decision surface and a subsample of both domains.
#[wasm_bindgen]
pub fn train_synthetic(
    kind: &str,
    magnitude: f64,
    k: usize,
    lambda: f64,
    epochs: usize,
    n: usize,
    seed: u32,
) -> Result<String, JsValue> {
    let kind: ShiftKind = kind.parse().map_err(js_err)?;
    let seed = u64::from(seed);
    let data = make_synthetic_pair(kind, magnitude, n, n, 2 * n, seed).map_err(js_err)?;
    let mut config = TrainConfig::new(2, 2, seed).with_discrepancy(DiscrepancySpec::cmd(k, lambda).map_err(js_err)?);
    config.epochs = epochs;
    let run = train(&data, &config).map_err(js_err)?;

    let step = 2.0 * EXTENT / (GRID - 1) as f64;
    let lattice = Array2::from_shape_fn((GRID * GRID, 2), |(i, c)| {
        let (row, col) = (i / GRID, i % GRID);
        if c == 0 {
            -EXTENT + col as f64 * step
        } else {
            EXTENT - row as f64 * step
        }
    });
    let probs = run.state.forward(lattice.view()).map_err(js_err)?;
    let surface = probs.output().column(1).to_vec();

    let classes_src = data.source.classes();
    let source = data
        .source
        .inputs()
        .outer_iter()
        .zip(classes_src)
        .take(POINTS_SHOWN)
        .map(|(r, c)| [r[0], r[1], c as f64])
        .collect();
    let classes_tgt = data.target_test.classes();
    let target = data
        .target_test
        .inputs()
        .outer_iter()
        .zip(classes_tgt)
        .take(POINTS_SHOWN)
        .map(|(r, c)| [r[0], r[1], c as f64])
        .collect();

    let out = Run {
        target_test_accuracy: run.target_test_accuracy,
        task_loss: run.history.iter().map(|h| h.task_loss).collect(),
        reg_value: run.history.iter().map(|h| h.reg_value).collect(),
        surface,
        grid: GRID,
        extent: EXTENT,
        source,
        target,
    };
    serde_json::to_string(&out).map_err(js_err)
}
