//! JSON checkpoint: model configuration, every parameter tensor with its
//! shape, batch-norm running statistics, and the normalisation /
//! preprocessing settings the model was trained with.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{RegressorConfig, RegressorModel};
use super::train::TrainConfig;
use crate::error::{GraspError, Result};
use crate::geometry::NormalizationConfig;
use crate::preprocess::PreprocessConfig;

pub const CHECKPOINT_FORMAT: &str = "applegrasp-regressor/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: RegressorConfig,
    pub normalization: NormalizationConfig,
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub training: Option<TrainConfig>,
    pub tensors: Vec<NamedTensor>,
}

fn matrix(name: String, a: &Array2<f64>) -> NamedTensor {
    NamedTensor {
        name,
        shape: vec![a.nrows(), a.ncols()],
        data: a.iter().copied().collect(),
    }
}

fn vector(name: String, a: &Array1<f64>) -> NamedTensor {
    NamedTensor {
        name,
        shape: vec![a.len()],
        data: a.to_vec(),
    }
}

enum Slot<'a> {
    Matrix(&'a mut Array2<f64>),
    Vector(&'a mut Array1<f64>),
}

fn slots(model: &mut RegressorModel) -> Vec<(String, Slot<'_>)> {
    let mut out = Vec::new();
    let groups = model
        .encoder
        .iter_mut()
        .enumerate()
        .map(|(i, b)| (format!("encoder.{i}"), b))
        .chain(
            model
                .head
                .iter_mut()
                .enumerate()
                .map(|(i, b)| (format!("head.{i}"), b)),
        );
    for (prefix, block) in groups {
        out.push((format!("{prefix}.weight"), Slot::Matrix(&mut block.dense.weight)));
        out.push((format!("{prefix}.bias"), Slot::Vector(&mut block.dense.bias)));
        if let Some(bn) = block.bn.as_mut() {
            out.push((format!("{prefix}.bn.gamma"), Slot::Vector(&mut bn.gamma)));
            out.push((format!("{prefix}.bn.beta"), Slot::Vector(&mut bn.beta)));
            out.push((format!("{prefix}.bn.running_mean"), Slot::Vector(&mut bn.running_mean)));
            out.push((format!("{prefix}.bn.running_var"), Slot::Vector(&mut bn.running_var)));
        }
    }
    out.push(("output.weight".into(), Slot::Matrix(&mut model.output.weight)));
    out.push(("output.bias".into(), Slot::Vector(&mut model.output.bias)));
    out
}

impl Checkpoint {
    pub fn from_model(
        model: &RegressorModel,
        normalization: NormalizationConfig,
        preprocess: PreprocessConfig,
        training: Option<TrainConfig>,
    ) -> Self {
        let mut scratch = model.clone();
        let tensors = slots(&mut scratch)
            .into_iter()
            .map(|(name, slot)| match slot {
                Slot::Matrix(m) => matrix(name, m),
                Slot::Vector(v) => vector(name, v),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            model: model.config.clone(),
            normalization,
            preprocess,
            training,
            tensors,
        }
    }

    /// Rebuilds the model, failing on any missing, extra or misshapen tensor.
    pub fn to_model(&self) -> Result<RegressorModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(GraspError::ShapeMismatch(format!(
                "unsupported checkpoint format `{}`",
                self.format
            )));
        }
        let mut model = RegressorModel::zeros(self.model.clone())?;
        let expected = slots(&mut model);
        if expected.len() != self.tensors.len() {
            return Err(GraspError::ShapeMismatch(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        for (name, slot) in expected {
            let t = self
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| GraspError::ShapeMismatch(format!("missing tensor `{name}`")))?;
            let want: Vec<usize> = match &slot {
                Slot::Matrix(m) => vec![m.nrows(), m.ncols()],
                Slot::Vector(v) => vec![v.len()],
            };
            if t.shape != want || t.data.len() != want.iter().product::<usize>() {
                return Err(GraspError::ShapeMismatch(format!(
                    "tensor `{name}` has shape {:?} with {} values, expected {want:?}",
                    t.shape,
                    t.data.len()
                )));
            }
            match slot {
                Slot::Matrix(m) => m
                    .as_slice_mut()
                    .expect("standard layout")
                    .copy_from_slice(&t.data),
                Slot::Vector(v) => v
                    .as_slice_mut()
                    .expect("standard layout")
                    .copy_from_slice(&t.data),
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| GraspError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| GraspError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| GraspError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}
