//! Uncertainty scorers. Every method and baseline reduces to a map from
//! preprocessed rows to one real per row, higher meaning more uncertain.

mod conformal;
mod intrinsic;
mod isotonic;

pub use conformal::{conformal_scores, ConformalScores, ConformalState};
pub use intrinsic::{decompose, entropy, UncertaintyTriple};
pub use isotonic::{pava, IsotonicCalibrator};

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{predicted_classes, KnnAnomalyModel, Predictor};

pub trait UncertaintyScorer: Send + Sync {
    fn name(&self) -> &str;
    /// False only for scorers that ignore the primary model.
    fn model_dependent(&self) -> bool;
    fn score(&self, x: ArrayView2<f64>) -> Vec<f64>;
}

/// `1 - max_c p(c|x)`.
pub fn max_confidence_score(proba: &Array2<f64>) -> Vec<f64> {
    proba.rows().into_iter().map(|r| 1.0 - r.fold(0.0f64, |a, &b| a.max(b))).collect()
}

/// Max-Confidence of the primary model, no post-processing.
pub struct MaxConfidence {
    model: Arc<dyn Predictor>,
}

impl MaxConfidence {
    pub fn new(model: Arc<dyn Predictor>) -> Self {
        Self { model }
    }
}

impl UncertaintyScorer for MaxConfidence {
    fn name(&self) -> &str {
        "max_confidence"
    }

    fn model_dependent(&self) -> bool {
        true
    }

    fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        max_confidence_score(&self.model.predict_proba(x))
    }
}

/// Max-Confidence of the isotonically calibrated distribution `(1 - g(p1), g(p1))`.
pub struct IsotonicMaxConfidence {
    model: Arc<dyn Predictor>,
    calibrator: IsotonicCalibrator,
}

impl IsotonicMaxConfidence {
    pub fn fit(model: Arc<dyn Predictor>, x_cal: ArrayView2<f64>, y_cal: &[u8]) -> Result<Self> {
        let p1: Vec<f64> = model.predict_proba(x_cal).column(1).to_vec();
        let calibrator = IsotonicCalibrator::fit_binary(&p1, y_cal)?;
        Ok(Self { model, calibrator })
    }

    pub fn calibrator(&self) -> &IsotonicCalibrator {
        &self.calibrator
    }

    pub fn calibrated_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut p = self.model.predict_proba(x);
        for mut row in p.rows_mut() {
            let g = self.calibrator.predict(row[1]);
            row[0] = 1.0 - g;
            row[1] = g;
        }
        p
    }
}

impl UncertaintyScorer for IsotonicMaxConfidence {
    fn name(&self) -> &str {
        "isotonic_max_confidence"
    }

    fn model_dependent(&self) -> bool {
        true
    }

    fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        max_confidence_score(&self.calibrated_proba(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalKind {
    PValue,
    Credibility,
    Confidence,
}

pub struct ConformalScorer {
    model: Arc<dyn Predictor>,
    state: Arc<ConformalState>,
    kind: ConformalKind,
}

impl ConformalScorer {
    pub fn fit_state(model: &dyn Predictor, x_cal: ArrayView2<f64>, y_cal: &[u8]) -> Result<ConformalState> {
        ConformalState::fit(&model.predict_proba(x_cal), y_cal)
    }

    /// Fails when a class has no calibration points.
    pub fn new(model: Arc<dyn Predictor>, state: Arc<ConformalState>, kind: ConformalKind) -> Result<Self> {
        if let Some(c) = state.unusable_classes().first() {
            return Err(Error::InvalidArgument(format!("class {c} has no calibration samples")));
        }
        Ok(Self { model, state, kind })
    }
}

impl UncertaintyScorer for ConformalScorer {
    fn name(&self) -> &str {
        match self.kind {
            ConformalKind::PValue => "conformal_p_value",
            ConformalKind::Credibility => "conformal_credibility",
            ConformalKind::Confidence => "conformal_confidence",
        }
    }

    fn model_dependent(&self) -> bool {
        true
    }

    fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let proba = self.model.predict_proba(x);
        let predicted = predicted_classes(&proba);
        self.state
            .p_values(&proba)
            .into_iter()
            .zip(predicted)
            .map(|(p, c)| {
                let s = conformal_scores(p, c as usize).expect("both classes usable, checked at construction");
                match self.kind {
                    ConformalKind::PValue => s.u_pvalue,
                    ConformalKind::Credibility => s.u_credibility,
                    ConformalKind::Confidence => s.u_confidence,
                }
            })
            .collect()
    }
}

/// Per-row entropy decomposition for an ensemble predictor.
pub fn ensemble_decomposition(model: &dyn Predictor, x: ArrayView2<f64>) -> Result<Vec<UncertaintyTriple>> {
    let members = model
        .member_proba(x)
        .ok_or_else(|| Error::InvalidArgument(format!("`{}` is not an ensemble", model.name())))?;
    if members.len() < 2 {
        return Err(Error::InvalidArgument("ensemble decomposition needs at least 2 members".into()));
    }
    let mut row_members = vec![[0.0; 2]; members.len()];
    Ok((0..x.nrows())
        .map(|i| {
            for (slot, m) in row_members.iter_mut().zip(&members) {
                *slot = [m[[i, 0]], m[[i, 1]]];
            }
            decompose(&row_members)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrinsicKind {
    Total,
    Aleatoric,
    Epistemic,
}

pub struct IntrinsicScorer {
    model: Arc<dyn Predictor>,
    kind: IntrinsicKind,
}

impl IntrinsicScorer {
    pub fn new(model: Arc<dyn Predictor>, kind: IntrinsicKind) -> Result<Self> {
        if !model.is_ensemble() {
            return Err(Error::InvalidArgument(format!(
                "intrinsic uncertainty needs an ensemble, `{}` is not one",
                model.name()
            )));
        }
        Ok(Self { model, kind })
    }
}

impl UncertaintyScorer for IntrinsicScorer {
    fn name(&self) -> &str {
        match self.kind {
            IntrinsicKind::Total => "total",
            IntrinsicKind::Aleatoric => "aleatoric",
            IntrinsicKind::Epistemic => "epistemic",
        }
    }

    fn model_dependent(&self) -> bool {
        true
    }

    fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        ensemble_decomposition(self.model.as_ref(), x)
            .expect("checked ensemble at construction")
            .into_iter()
            .map(|t| match self.kind {
                IntrinsicKind::Total => t.total,
                IntrinsicKind::Aleatoric => t.aleatoric,
                IntrinsicKind::Epistemic => t.epistemic,
            })
            .collect()
    }
}

/// Model-free kNN distance baseline.
pub struct KnnScorer {
    model: Arc<KnnAnomalyModel>,
}

impl KnnScorer {
    pub fn new(model: Arc<KnnAnomalyModel>) -> Self {
        Self { model }
    }
}

impl UncertaintyScorer for KnnScorer {
    fn name(&self) -> &str {
        "knn_distance"
    }

    fn model_dependent(&self) -> bool {
        false
    }

    fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.model.score(x)
    }
}

impl fmt::Debug for dyn UncertaintyScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UncertaintyScorer({})", self.name())
    }
}
