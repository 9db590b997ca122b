use std::path::Path;

use serde::{Deserialize, Serialize};

use super::suite::SuiteConfig;
use crate::error::{GraspError, Result};
use crate::estimators::TrainRecipe;
use crate::synthgen::GenConfig;

/// Contents of a TOML config file. Every table and field is optional and
/// falls back to its default.
///
/// ```toml
/// [generator]
/// radius = [0.03, 0.05]
/// [training.train]
/// epochs = 60
/// [suite.hough]
/// center_bin = 0.005
/// [suite.thresholds]
/// iou = 0.75
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Used by `gen`.
    pub generator: GenConfig,
    /// Used by `train`, including the augmentation policy.
    pub training: TrainRecipe,
    /// Used by `bench` and `fit`.
    pub suite: SuiteConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GraspError::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GraspError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            GraspError::InvalidArgument(m) => GraspError::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GraspError::InvalidArgument(format!("config: {e}")))
    }
}
