//! Model files: a JSON document
//!
//! ```json
//! { "format": "uqbench-model", "version": 1, "schema_hash": "<hex sha256>",
//!   "model": { "kind": "logistic", ... } }
//! ```
//!
//! `schema_hash` is [`Preprocessor::schema_hash`](crate::data::Preprocessor::schema_hash)
//! of the feature layout the model was trained on. Floats are written in
//! shortest round-trip form, so weights reload bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DeepEnsemble, LogisticRegression, Mlp, Predictor};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "uqbench-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredModel {
    Logistic(LogisticRegression),
    Mlp(Mlp),
    DeepEnsemble(DeepEnsemble),
}

impl StoredModel {
    pub fn into_predictor(self) -> std::sync::Arc<dyn Predictor> {
        match self {
            StoredModel::Logistic(m) => std::sync::Arc::new(m),
            StoredModel::Mlp(m) => std::sync::Arc::new(m),
            StoredModel::DeepEnsemble(m) => std::sync::Arc::new(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub schema_hash: String,
    pub model: StoredModel,
}

pub fn save_model(path: impl AsRef<Path>, model: &StoredModel, schema_hash: &str) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_FORMAT_VERSION,
        schema_hash: schema_hash.to_string(),
        model: model.clone(),
    };
    let body = serde_json::to_string(&file)?;
    std::fs::write(path.as_ref(), body).map_err(|e| Error::io(path.as_ref(), e))
}

/// Loads a model file, checking the format tag, version and, when given,
/// the expected feature-layout hash.
pub fn load_model(path: impl AsRef<Path>, expected_schema: Option<&str>) -> Result<StoredModel> {
    let body = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    let file: ModelFile = serde_json::from_str(&body)?;
    if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported model file {} v{}",
            file.format, file.version
        )));
    }
    if let Some(expected) = expected_schema {
        if expected != file.schema_hash {
            return Err(Error::InvalidArgument("model was trained on a different feature layout".into()));
        }
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LogisticConfig, MlpConfig};
    use ndarray::array;

    #[test]
    fn round_trip_is_bit_exact() {
        let x = array![[0.13, -2.7], [1.1, 0.333], [-0.9, 0.5], [2.5, 1.9], [0.0, -0.1]];
        let y = [0, 1, 0, 1, 1];
        let dir = tempfile::tempdir().unwrap();
        let models = [
            StoredModel::Logistic(LogisticRegression::fit(x.view(), &y, &LogisticConfig::default()).unwrap()),
            StoredModel::DeepEnsemble(
                DeepEnsemble::fit(x.view(), &y, 9, 2, &MlpConfig { hidden: 4, max_epochs: 5, ..Default::default() })
                    .unwrap(),
            ),
        ];
        for (i, model) in models.into_iter().enumerate() {
            let path = dir.path().join(format!("m{i}.json"));
            save_model(&path, &model, "abc").unwrap();
            let back = load_model(&path, Some("abc")).unwrap();
            assert_eq!(back, model);
            let (a, b) = (model.into_predictor(), back.into_predictor());
            assert_eq!(a.predict_proba(x.view()), b.predict_proba(x.view()));
            assert!(load_model(&path, Some("other")).is_err());
        }
    }
}
