use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lm::{ModelShape, ReferenceLM};
use super::tokenizer::{Tokenizer, TokenizerSpec};
use super::ModelError;

pub const FORMAT: &str = "era-lm";
pub const VERSION: u32 = 1;

/// Self-describing JSON model file: header, tokenizer, shape and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub tokenizer: TokenizerSpec,
    pub shape: ModelShape,
    pub embedding: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
    /// Free-form provenance (training stage, config hash, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(model: &ReferenceLM, tokenizer: &Tokenizer) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            tokenizer: tokenizer.spec(),
            shape: model.shape(),
            embedding: model.embedding().to_vec(),
            output_weights: model.output_weights().to_vec(),
            output_bias: model.output_bias().to_vec(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// Validates the header and shapes and rebuilds the model and tokenizer.
    pub fn into_parts(self) -> Result<(ReferenceLM, Tokenizer), ModelError> {
        if self.format != FORMAT {
            return Err(ModelError::InvalidCheckpoint(format!(
                "format {:?}, expected {FORMAT:?}",
                self.format
            )));
        }
        if self.version != VERSION {
            return Err(ModelError::InvalidCheckpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.shape.context_order == 0 {
            return Err(ModelError::InvalidCheckpoint("context order 0".into()));
        }
        let tokenizer = Tokenizer::from_spec(self.tokenizer)?;
        let v = tokenizer.vocab_size();
        let model = ReferenceLM::from_parts(
            self.shape,
            v,
            self.embedding,
            self.output_weights,
            self.output_bias,
        )
        .ok_or_else(|| {
            ModelError::InvalidCheckpoint(format!(
                "parameter arrays do not match shape {:?} with vocabulary {v}",
                self.shape
            ))
        })?;
        if !model.is_finite() {
            return Err(ModelError::InvalidCheckpoint("non-finite parameters".into()));
        }
        Ok((model, tokenizer))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes a model and its tokenizer.
pub fn save_model(
    path: &Path,
    model: &ReferenceLM,
    tokenizer: &Tokenizer,
    metadata: BTreeMap<String, String>,
) -> Result<(), ModelError> {
    let mut ckpt = Checkpoint::new(model, tokenizer);
    ckpt.metadata = metadata;
    ckpt.save(path)
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<(ReferenceLM, Tokenizer), ModelError> {
    Checkpoint::load(path)?.into_parts()
}
