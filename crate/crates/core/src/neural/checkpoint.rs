//! Single-document JSON checkpoints. Tensor data is base64 of little-endian
//! f64 values.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::model::{Model, ModelConfig, Vocabs};
use crate::neural::params::{ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub data: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub frozen: bool,
}

/// Training outcome stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epoch: usize,
    pub dev_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<TrainingSummary>,
    pub tensors: BTreeMap<String, TensorRecord>,
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(data: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(data)
        .map_err(|e| Error::Checkpoint(format!("bad base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(
            "tensor byte length is not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Checkpoint {
    pub fn from_model(model: &Model, summary: Option<TrainingSummary>) -> Self {
        let tensors = model
            .params
            .ids()
            .map(|id| {
                let t = model.params.get(id);
                (
                    model.params.name(id).to_owned(),
                    TensorRecord {
                        shape: [t.rows, t.cols],
                        data: encode_f64s(&t.data),
                        frozen: model.params.is_frozen(id),
                    },
                )
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            vocabs: model.vocabs.clone(),
            summary,
            tensors,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let mut params = ParamStore::new();
        for (name, record) in self.tensors {
            let data = decode_f64s(&record.data)?;
            let tensor = Tensor::from_data(record.shape[0], record.shape[1], data)
                .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
            let id = params.add(name, tensor);
            params.set_frozen(id, record.frozen);
        }
        Model::from_parts(self.config, self.vocabs, params)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
