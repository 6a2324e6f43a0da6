//! Model checkpoints: JSON with the config and flat row-major parameter
//! arrays per layer.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::mlp::{DenseLayer, MlpConfig, MlpModel};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerParams {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `[out_dim][in_dim]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: MlpConfig,
    layers: Vec<LayerParams>,
}

pub fn save_checkpoint(path: &Path, model: &MlpModel) -> Result<()> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config: model.config().clone(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerParams {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    let writer = BufWriter::new(
        File::create(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?,
    );
    serde_json::to_writer(writer, &file)
        .map_err(|e| Error::MalformedLine { path: path.to_path_buf(), line: 0, msg: e.to_string() })
}

pub fn load_checkpoint(path: &Path) -> Result<MlpModel> {
    let reader = BufReader::new(
        File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?,
    );
    let file: CheckpointFile = serde_json::from_reader(reader).map_err(|e| Error::MalformedLine {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })?;
    if file.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "checkpoint format {} unsupported (expected {})",
            file.format_version, CHECKPOINT_FORMAT_VERSION
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| DenseLayer { in_dim: l.in_dim, out_dim: l.out_dim, weights: l.weights, bias: l.bias })
        .collect();
    MlpModel::from_parts(layers, file.config)
}
