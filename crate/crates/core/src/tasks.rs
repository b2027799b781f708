//! The five downstream tasks an uncertainty score is evaluated on.
//!
//! Each task consumes a [`TaskInput`]: uncertainty scores, model predictions
//! and true labels for the in-distribution test set and for the shifted set.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{auroc, f1_score, ks_two_sample, trapezoid_area};
use crate::models::Predictor;
use crate::rng::{bootstrap_indices, derive_indexed};
use crate::scores::UncertaintyScorer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Retention,
    ErrorDetection,
    OodDetection,
    ShiftDetection,
    PerfDrop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Task {
    pub const ALL: [Task; 5] =
        [Task::Retention, Task::ErrorDetection, Task::OodDetection, Task::ShiftDetection, Task::PerfDrop];

    pub fn direction(self) -> Direction {
        match self {
            Task::PerfDrop => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    /// Tasks whose metric depends on the primary model's errors.
    pub fn is_error_based(self) -> bool {
        matches!(self, Task::Retention | Task::ErrorDetection | Task::PerfDrop)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Retention => "retention",
            Task::ErrorDetection => "error_detection",
            Task::OodDetection => "ood_detection",
            Task::ShiftDetection => "shift_detection",
            Task::PerfDrop => "perf_drop",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Task::Retention => "Retention",
            Task::ErrorDetection => "Error Detection",
            Task::OodDetection => "OoD Detection",
            Task::ShiftDetection => "Shift Detection",
            Task::PerfDrop => "Perf. Drop Pred.",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfDropMode {
    /// Mean absolute error over bootstrap resamples of the shifted set.
    Bootstrap,
    /// Absolute error on the shifted set itself.
    SingleSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub retention_grid: usize,
    pub n_bootstrap: usize,
    pub alpha: f64,
    pub perf_drop_mode: PerfDropMode,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self { retention_grid: 101, n_bootstrap: 100, alpha: 0.05, perf_drop_mode: PerfDropMode::Bootstrap }
    }
}

/// Scores, predictions and labels of one evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub predictions: Vec<u8>,
    pub labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, predictions: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != predictions.len() || scores.len() != labels.len() {
            return Err(Error::InvalidArgument("scores, predictions and labels differ in length".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { scores, predictions, labels })
    }

    pub fn evaluate(
        model: &dyn Predictor,
        scorer: &dyn UncertaintyScorer,
        x: ArrayView2<f64>,
        labels: &[u8],
    ) -> Result<Self> {
        Self::new(scorer.score(x), model.predict(x), labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn error_indicator(&self) -> Vec<u8> {
        self.predictions.iter().zip(&self.labels).map(|(p, l)| u8::from(p != l)).collect()
    }

    pub fn error_count(&self) -> usize {
        self.predictions.iter().zip(&self.labels).filter(|(p, l)| p != l).count()
    }

    pub fn error_rate(&self) -> f64 {
        self.error_count() as f64 / self.len() as f64
    }

    fn resample(&self, indices: &[usize]) -> ScoredSet {
        ScoredSet {
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            predictions: indices.iter().map(|&i| self.predictions[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskInput {
    pub test: ScoredSet,
    pub shifted: ScoredSet,
    pub rng_seed: u64,
}

impl TaskInput {
    pub fn evaluate(
        model: &dyn Predictor,
        scorer: &dyn UncertaintyScorer,
        test: (ArrayView2<f64>, &[u8]),
        shifted: (ArrayView2<f64>, &[u8]),
        rng_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            test: ScoredSet::evaluate(model, scorer, test.0, test.1)?,
            shifted: ScoredSet::evaluate(model, scorer, shifted.0, shifted.1)?,
            rng_seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetentionCurve {
    pub budgets: Vec<f64>,
    pub f1: Vec<f64>,
    pub area: f64,
}

/// Oracle-augmented F1 over a uniform grid of budgets `r = j / (grid - 1)`.
/// At budget `r` the `ceil(r n)` most uncertain predictions are replaced by
/// the true labels; equal scores keep sample order.
pub fn retention(test: &ScoredSet, grid_size: usize) -> Result<RetentionCurve> {
    if test.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument("retention grid needs at least 2 budgets".into()));
    }
    let n = test.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| test.scores[b].total_cmp(&test.scores[a]));
    let steps = grid_size - 1;
    let mut budgets = Vec::with_capacity(grid_size);
    let mut f1 = Vec::with_capacity(grid_size);
    let mut augmented = test.predictions.clone();
    let mut replaced = 0;
    for j in 0..grid_size {
        let k = (j * n).div_ceil(steps);
        while replaced < k {
            let i = order[replaced];
            augmented[i] = test.labels[i];
            replaced += 1;
        }
        budgets.push(j as f64 / steps as f64);
        f1.push(f1_score(&augmented, &test.labels));
    }
    let area = trapezoid_area(&budgets, &f1)?;
    Ok(RetentionCurve { budgets, f1, area })
}

/// AUROC of the uncertainty score for the event "prediction is wrong".
/// `None` when the model is right everywhere or wrong everywhere.
pub fn error_detection(test: &ScoredSet) -> Option<f64> {
    auroc(&test.scores, &test.error_indicator())
}

/// AUROC of the uncertainty score separating shifted rows (positives) from
/// in-distribution rows.
pub fn ood_detection(in_scores: &[f64], shifted_scores: &[f64]) -> Result<f64> {
    if in_scores.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    if shifted_scores.is_empty() {
        return Err(Error::EmptyPartition("shifted"));
    }
    let scores: Vec<f64> = in_scores.iter().chain(shifted_scores).copied().collect();
    let labels: Vec<u8> =
        std::iter::repeat_n(0u8, in_scores.len()).chain(std::iter::repeat_n(1u8, shifted_scores.len())).collect();
    Ok(auroc(&scores, &labels).expect("both groups non-empty"))
}

fn bootstrap_seed(seed: u64, b: usize) -> u64 {
    derive_indexed(seed, "bootstrap", b)
}

/// Fraction of bootstrap resamples of the shifted scores that a KS test
/// against the test scores flags at level `alpha`.
pub fn shift_detection(
    test_scores: &[f64],
    shifted_scores: &[f64],
    n_bootstrap: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    if test_scores.is_empty() || shifted_scores.is_empty() {
        return Err(Error::EmptyPartition(if test_scores.is_empty() { "test" } else { "shifted" }));
    }
    if n_bootstrap == 0 {
        return Err(Error::InvalidArgument("n_bootstrap must be positive".into()));
    }
    let mut detected = 0;
    for b in 0..n_bootstrap {
        let idx = bootstrap_indices(shifted_scores.len(), bootstrap_seed(seed, b));
        let sample: Vec<f64> = idx.iter().map(|&i| shifted_scores[i]).collect();
        if ks_two_sample(test_scores, &sample)?.p_value < alpha {
            detected += 1;
        }
    }
    Ok(detected as f64 / n_bootstrap as f64)
}

/// Threshold fitted on labeled test data so that the share of scores above
/// it equals the test error rate.
///
/// `threshold` is the lower empirical `(1 - error_rate)` quantile. With
/// distinct scores exactly `error_count` scores lie strictly above it. When
/// scores tie at the threshold, `tie_weight` is the fraction of the tied
/// mass counted as "above" so the test-set estimate still equals the error
/// rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtcState {
    pub threshold: f64,
    pub tie_weight: f64,
    pub test_error_rate: f64,
    /// All test scores are equal; the estimate then ignores the inputs.
    pub low_information: bool,
}

pub fn atc_fit(test: &ScoredSet) -> Result<AtcState> {
    if test.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    let n = test.len();
    let errors = test.error_count();
    let mut sorted = test.scores.clone();
    sorted.sort_by(f64::total_cmp);
    let rate = errors as f64 / n as f64;
    let idx = (((n - errors) as f64 / n as f64) * (n - 1) as f64).floor() as usize;
    let threshold = sorted[idx.min(n - 1)];
    let above = sorted.iter().filter(|&&s| s > threshold).count();
    let tied = sorted.iter().filter(|&&s| s == threshold).count();
    let tie_weight = ((errors as f64 - above as f64) / tied as f64).clamp(0.0, 1.0);
    let low_information = sorted[0] == sorted[n - 1];
    if low_information {
        log::debug!("constant uncertainty scores; ATC estimate carries no information");
    }
    Ok(AtcState { threshold, tie_weight, test_error_rate: rate, low_information })
}

pub fn atc_estimate(state: &AtcState, scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyPartition("shifted"));
    }
    let above = scores.iter().filter(|&&s| s > state.threshold).count() as f64;
    let tied = scores.iter().filter(|&&s| s == state.threshold).count() as f64;
    Ok((above + state.tie_weight * tied) / scores.len() as f64)
}

/// Mean absolute error between the ATC error estimate and the true error
/// rate on the shifted data.
pub fn perf_drop_prediction(input: &TaskInput, n_bootstrap: usize, mode: PerfDropMode) -> Result<f64> {
    let state = atc_fit(&input.test)?;
    if input.shifted.is_empty() {
        return Err(Error::EmptyPartition("shifted"));
    }
    match mode {
        PerfDropMode::SingleSet => {
            Ok((atc_estimate(&state, &input.shifted.scores)? - input.shifted.error_rate()).abs())
        }
        PerfDropMode::Bootstrap => {
            if n_bootstrap == 0 {
                return Err(Error::InvalidArgument("n_bootstrap must be positive".into()));
            }
            let mut total = 0.0;
            for b in 0..n_bootstrap {
                let idx = bootstrap_indices(input.shifted.len(), bootstrap_seed(input.rng_seed, b));
                let sample = input.shifted.resample(&idx);
                total += (atc_estimate(&state, &sample.scores)? - sample.error_rate()).abs();
            }
            Ok(total / n_bootstrap as f64)
        }
    }
}

/// Runs one task. `Ok(None)` marks a metric that is undefined for this input
/// (error detection on a model that is always right or always wrong).
pub fn evaluate_task(task: Task, input: &TaskInput, params: &TaskParams) -> Result<Option<f64>> {
    Ok(match task {
        Task::Retention => Some(retention(&input.test, params.retention_grid)?.area),
        Task::ErrorDetection => {
            let v = error_detection(&input.test);
            if v.is_none() {
                log::info!("error detection undefined: test errors are all-or-nothing");
            }
            v
        }
        Task::OodDetection => Some(ood_detection(&input.test.scores, &input.shifted.scores)?),
        Task::ShiftDetection => Some(shift_detection(
            &input.test.scores,
            &input.shifted.scores,
            params.n_bootstrap,
            params.alpha,
            input.rng_seed,
        )?),
        Task::PerfDrop => Some(perf_drop_prediction(input, params.n_bootstrap, params.perf_drop_mode)?),
    })
}
