use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierConfig, GcnClassifier};
use crate::features::FeatureScaler;
use crate::nn::checkpoint::{
    export_parameters, import_parameters, ParameterRecord, FORMAT_VERSION,
};
use crate::{Error, Result};

/// Everything needed to rebuild a trained classifier and its input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub format_version: u32,
    pub architecture: u8,
    pub config: ClassifierConfig,
    pub scaler: FeatureScaler,
    pub parameters: Vec<ParameterRecord>,
    /// Free-form provenance written by callers (dataset paths, split seed).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl ClassifierCheckpoint {
    pub fn capture(
        model: &GcnClassifier,
        scaler: &FeatureScaler,
        metadata: serde_json::Value,
    ) -> Self {
        ClassifierCheckpoint {
            format_version: FORMAT_VERSION,
            architecture: model.architecture().id(),
            config: model.config().clone(),
            scaler: scaler.clone(),
            parameters: export_parameters(model.named_parameters()),
            metadata,
        }
    }

    pub fn restore(&self) -> Result<GcnClassifier> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.architecture != self.config.architecture {
            return Err(Error::Checkpoint(format!(
                "architecture {} disagrees with config architecture {}",
                self.architecture, self.config.architecture
            )));
        }
        let mut model = GcnClassifier::new(&self.config)?;
        import_parameters(&self.parameters, model.named_parameters_mut())?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}
