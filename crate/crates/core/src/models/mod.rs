//! Probabilistic binary classifiers ("primary models") and the kNN
//! anomaly model used as the model-free OoD baseline.
//!
//! Anything that can emit an `N x 2` row-stochastic probability matrix can
//! take part in the benchmark by implementing [`Predictor`]; tree models or
//! externally trained estimators plug in the same way as the reference
//! implementations here.

mod ensemble;
mod knn;
mod logistic;
mod mlp;
mod persist;

pub use ensemble::DeepEnsemble;
pub use knn::KnnAnomalyModel;
pub use logistic::{logistic_objective, LogisticConfig, LogisticRegression};
pub use mlp::{Mlp, MlpConfig, MlpParams};
pub use persist::{load_model, save_model, ModelFile, StoredModel, MODEL_FORMAT, MODEL_FORMAT_VERSION};

use std::fmt::Debug;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-12;

pub trait Predictor: Debug + Send + Sync {
    fn name(&self) -> &str;

    /// `N x 2` matrix; row `i` is `(p(0|x_i), p(1|x_i))`.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64>;

    /// Per-member probabilities for ensembles, `None` otherwise.
    fn member_proba(&self, _x: ArrayView2<f64>) -> Option<Vec<Array2<f64>>> {
        None
    }

    fn is_ensemble(&self) -> bool {
        false
    }

    fn predict(&self, x: ArrayView2<f64>) -> Vec<u8> {
        predicted_classes(&self.predict_proba(x))
    }
}

/// Arg-max class per row; exact ties go to class 0.
pub fn predicted_classes(proba: &Array2<f64>) -> Vec<u8> {
    proba.rows().into_iter().map(|r| u8::from(r[1] > r[0])).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Mlp,
    DeepEnsemble,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Mlp => "mlp",
            ModelKind::DeepEnsemble => "deep_ensemble",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "Logistic Regression",
            ModelKind::Mlp => "Multi-Layer Perceptron",
            ModelKind::DeepEnsemble => "Deep Ensemble",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "mlp" => Ok(ModelKind::Mlp),
            "deep_ensemble" => Ok(ModelKind::DeepEnsemble),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub logistic: LogisticConfig,
    pub mlp: MlpConfig,
    pub ensemble_size: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { logistic: LogisticConfig::default(), mlp: MlpConfig::default(), ensemble_size: 10 }
    }
}

pub fn fit_model(
    kind: ModelKind,
    x: ArrayView2<f64>,
    y: &[u8],
    seed: u64,
    settings: &ModelSettings,
) -> Result<Arc<dyn Predictor>> {
    Ok(match kind {
        ModelKind::Logistic => Arc::new(LogisticRegression::fit(x, y, &settings.logistic)?),
        ModelKind::Mlp => Arc::new(Mlp::fit(x, y, seed, &settings.mlp)?),
        ModelKind::DeepEnsemble => {
            Arc::new(DeepEnsemble::fit(x, y, seed, settings.ensemble_size, &settings.mlp)?)
        }
    })
}

pub(crate) fn check_training_data(x: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}
