//! Self-describing model checkpoints.
//!
//! A checkpoint is one JSON document: format version, configuration, all
//! hyper-parameters, the variational posterior (Cholesky factors stored as
//! dense lower-triangular values, row-major) and the training inputs.
//! Floating-point values are rendered in shortest round-trip form, so a
//! reloaded checkpoint reproduces predictions bitwise.

use serde::{Deserialize, Serialize};

use hmocgp_core::model::TrainedModel;

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: TrainedModel,
}

pub fn save(path: &str, model: &TrainedModel) -> Result<()> {
    let doc = Checkpoint { format_version: FORMAT_VERSION, model: model.clone() };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config {
        path: path.into(),
        message: e.to_string(),
    })?;
    crate::csvio::write_atomic(path, &json)
}

pub fn load(path: &str) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: Checkpoint = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.into(),
        message: e.to_string(),
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(CliError::Config {
            path: path.into(),
            message: format!(
                "unsupported checkpoint format_version {}, expected {FORMAT_VERSION}",
                doc.format_version
            ),
        });
    }
    Ok(doc.model)
}
