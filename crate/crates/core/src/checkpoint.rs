//! JSON checkpoint of a [`NetworkState`].
//!
//! Weights are stored row-major. Floats are written in shortest
//! round-trip form, so reading a checkpoint back reproduces every
//! parameter bit for bit.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Layer, LayerSpec, NetworkState};

const FORMAT: &str = "moment-match-network";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointLayer {
    spec: LayerSpec,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    seed: u64,
    layers: Vec<CheckpointLayer>,
}

pub fn to_json(state: &NetworkState) -> Result<String> {
    let ckpt = Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        seed: state.seed(),
        layers: state
            .layers()
            .iter()
            .map(|l| CheckpointLayer {
                spec: l.spec,
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&ckpt)?)
}

pub fn from_json(text: &str) -> Result<NetworkState> {
    let ckpt: Checkpoint = serde_json::from_str(text)?;
    if ckpt.format != FORMAT || ckpt.version != VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported checkpoint {} v{}",
            ckpt.format, ckpt.version
        )));
    }
    let layers = ckpt
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let weights = Array2::from_shape_vec((l.spec.out_dim, l.spec.in_dim), l.weights)
                .map_err(|_| Error::DimensionMismatch(format!("layer {i}: weight count does not match spec")))?;
            Ok(Layer {
                weights,
                bias: Array1::from(l.bias),
                spec: l.spec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkState::from_layers(layers, ckpt.seed)
}

pub fn write(state: &NetworkState, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(state)? + "\n")?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<NetworkState> {
    from_json(&fs::read_to_string(path)?)
}
