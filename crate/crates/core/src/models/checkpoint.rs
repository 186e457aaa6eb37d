use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, ModelSpec, TrainConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

const FORMAT: &str = "gnnevade-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
}

/// First line of a checkpoint file. The parameter block that follows holds
/// every tensor of `params`, in order, as row-major little-endian `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub seed: u64,
    pub config: TrainConfig,
    pub val_accuracy: f64,
    pub best_epoch: usize,
    pub params: Vec<ParamEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adv_config: Option<serde_json::Value>,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &TrainedModel,
    adv_config: Option<serde_json::Value>,
) -> Result<()> {
    let p = model.params();
    let header = CheckpointHeader {
        format: FORMAT.into(),
        version: VERSION,
        spec: p.spec().clone(),
        seed: model.config().seed,
        config: model.config().clone(),
        val_accuracy: model.val_accuracy(),
        best_epoch: model.best_epoch(),
        params: p
            .names()
            .iter()
            .zip(p.tensors())
            .map(|(n, t)| ParamEntry {
                name: n.clone(),
                shape: [t.rows(), t.cols()],
            })
            .collect(),
        adv_config,
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for t in p.tensors() {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TrainedModel, CheckpointHeader)> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    let expected = header.spec.param_shapes();
    if expected.len() != header.params.len()
        || expected
            .iter()
            .zip(&header.params)
            .any(|((n, (r, c)), e)| *n != e.name || [*r, *c] != e.shape)
    {
        return Err(Error::Checkpoint("parameter manifest does not match the architecture".into()));
    }
    let mut block = bytes[nl + 1..].chunks_exact(8);
    if block.len() != expected.iter().map(|(_, (r, c))| r * c).sum::<usize>()
        || !block.remainder().is_empty()
    {
        return Err(Error::Checkpoint("parameter block has the wrong length".into()));
    }
    let mut tensors = Vec::with_capacity(expected.len());
    for e in &header.params {
        let [r, c] = e.shape;
        let data = block
            .by_ref()
            .take(r * c)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(DenseMatrix::from_vec(r, c, data)?);
    }
    let params = ModelParams::from_tensors(header.spec.clone(), tensors)?;
    let model = TrainedModel::new(params, header.config.clone(), header.val_accuracy, header.best_epoch);
    Ok((model, header))
}
