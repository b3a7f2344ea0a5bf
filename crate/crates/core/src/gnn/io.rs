use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::DenseLayer;
use super::xenet::{DenseHead, XenetLayer};
use super::{Binding, EdgeModel, GnnModel, MlpModel, ModelConfig};
use crate::error::{Error, Result};
use crate::samplegen::Normalizer;

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct XenetFile {
    format_version: u64,
    kind: String,
    config: ModelConfig,
    normalizer: Normalizer,
    layers: Vec<XenetLayer>,
    dense: DenseHead,
    binding: Binding,
    threshold: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpFile {
    format_version: u64,
    kind: String,
    config: ModelConfig,
    normalizer: Normalizer,
    node_layers: Vec<DenseLayer>,
    edge_layers: Vec<DenseLayer>,
    combine: DenseLayer,
    binding: Binding,
    threshold: Option<f64>,
}

/// A model file of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Xenet(GnnModel),
    Mlp(MlpModel),
}

impl SavedModel {
    pub fn threshold(&self) -> Option<f64> {
        match self {
            SavedModel::Xenet(m) => m.threshold,
            SavedModel::Mlp(m) => m.threshold,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Xenet(_) => "xenet",
            SavedModel::Mlp(_) => "mlp",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let s = match self {
            SavedModel::Xenet(m) => serde_json::to_string(&XenetFile {
                format_version: MODEL_FORMAT_VERSION,
                kind: "xenet".into(),
                config: m.config.clone(),
                normalizer: m.normalizer.clone(),
                layers: m.layers.clone(),
                dense: m.dense.clone(),
                binding: m.binding.clone(),
                threshold: m.threshold,
            })?,
            SavedModel::Mlp(m) => serde_json::to_string(&MlpFile {
                format_version: MODEL_FORMAT_VERSION,
                kind: "mlp".into(),
                config: m.config.clone(),
                normalizer: m.normalizer.clone(),
                node_layers: m.node_layers.clone(),
                edge_layers: m.edge_layers.clone(),
                combine: m.combine.clone(),
                binding: m.binding.clone(),
                threshold: m.threshold,
            })?,
        };
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file is not valid JSON: {e}")))?;
        let version = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let kind = raw.get("kind").and_then(|k| k.as_str()).unwrap_or("xenet").to_owned();
        let corrupt = |e: serde_json::Error| Error::Format(format!("corrupt model file: {e}"));
        let model = match kind.as_str() {
            "xenet" => {
                let f: XenetFile = serde_json::from_value(raw).map_err(corrupt)?;
                SavedModel::Xenet(GnnModel {
                    config: f.config,
                    normalizer: f.normalizer,
                    layers: f.layers,
                    dense: f.dense,
                    binding: f.binding,
                    threshold: f.threshold,
                })
            }
            "mlp" => {
                let f: MlpFile = serde_json::from_value(raw).map_err(corrupt)?;
                SavedModel::Mlp(MlpModel {
                    config: f.config,
                    normalizer: f.normalizer,
                    node_layers: f.node_layers,
                    edge_layers: f.edge_layers,
                    combine: f.combine,
                    binding: f.binding,
                    threshold: f.threshold,
                })
            }
            other => return Err(Error::Format(format!("unknown model kind `{other}`"))),
        };
        model.check_shapes()?;
        Ok(model)
    }

    /// Rejects files whose parameter shapes disagree with their own config.
    fn check_shapes(&self) -> Result<()> {
        let expected = match self {
            SavedModel::Xenet(m) => GnnModel::init(m.config.clone(), m.binding.clone()).shapes(),
            SavedModel::Mlp(m) => MlpModel::init(m.config.clone(), m.binding.clone()).shapes(),
        };
        let (actual, finite) = match self {
            SavedModel::Xenet(m) => (m.shapes(), m.params().iter().all(|p| p.iter().all(|v| v.is_finite()))),
            SavedModel::Mlp(m) => (m.shapes(), m.params().iter().all(|p| p.iter().all(|v| v.is_finite()))),
        };
        if expected != actual {
            return Err(Error::Format("parameter shapes do not match the stored config".into()));
        }
        if !finite {
            return Err(Error::Format("model contains non-finite parameters".into()));
        }
        Ok(())
    }
}

trait Shapes {
    fn shapes(&self) -> Vec<usize>;
}

impl<M: EdgeModel> Shapes for M {
    fn shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    SavedModel::from_json(&std::fs::read_to_string(path)?)
}
