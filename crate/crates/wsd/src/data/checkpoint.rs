//! Versioned single-file checkpoint: config, ordered vocabulary, sense
//! inventory, and every tensor with name, shape, and row-major values.
//!
//! Serialized as JSON; f64 values round-trip bit-exactly through the
//! shortest-representation float formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Result, WsdError};
use crate::model::{zero_params, ModelParams};

use super::vocab::{SenseInventory, Vocabulary};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: TrainConfig,
    vocab: Vec<String>,
    inventory: Vec<(String, Vec<String>, Vec<usize>)>,
    tensors: Vec<TensorRecord>,
}

/// A trained model bundled with everything needed to run it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub inventory: SenseInventory,
    pub config: TrainConfig,
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    let tensors = model
        .params
        .tensor_names()
        .into_iter()
        .map(|name| {
            let (data, shape) = model.params.tensor(&name).unwrap();
            TensorRecord { name, shape, data: data.to_vec() }
        })
        .collect();
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        vocab: model.vocab.words().to_vec(),
        inventory: model.inventory.entries(),
        tensors,
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let json = std::fs::read_to_string(path)
        .map_err(|e| WsdError::Checkpoint(format!("{}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_str(&json)
        .map_err(|e| WsdError::Checkpoint(format!("{}: {e}", path.display())))?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(WsdError::CheckpointVersion {
            expected: CHECKPOINT_VERSION,
            found: file.format_version,
        });
    }
    let vocab = Vocabulary::from_words(file.vocab)?;
    let inventory = SenseInventory::from_entries(file.inventory)?;
    let mut params = zero_params(&vocab, &inventory, &file.config);

    let expected: Vec<String> = params.tensor_names();
    let found: Vec<&str> = file.tensors.iter().map(|t| t.name.as_str()).collect();
    if expected.len() != found.len() || expected.iter().zip(&found).any(|(a, b)| a != b) {
        return Err(WsdError::Checkpoint(format!(
            "tensor manifest mismatch: expected {} tensors, found {}",
            expected.len(),
            found.len()
        )));
    }
    for record in file.tensors {
        let (_, shape) = params.tensor(&record.name).unwrap();
        if shape != record.shape {
            return Err(WsdError::Shape {
                tensor: record.name,
                expected: format!("{shape:?}"),
                actual: format!("{:?}", record.shape),
            });
        }
        let dst = params.tensor_mut(&record.name).unwrap();
        if dst.len() != record.data.len() {
            return Err(WsdError::Shape {
                tensor: record.name,
                expected: format!("{} values", dst.len()),
                actual: format!("{} values", record.data.len()),
            });
        }
        dst.copy_from_slice(&record.data);
    }
    Ok(TrainedModel { params, vocab, inventory, config: file.config })
}

/// Human-readable manifest: (tensor name, shape) pairs in file order.
pub fn manifest(model: &TrainedModel) -> Vec<(String, Vec<usize>)> {
    model
        .params
        .tensor_names()
        .into_iter()
        .map(|name| {
            let (_, shape) = model.params.tensor(&name).unwrap();
            (name, shape)
        })
        .collect()
}
