use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchmarkConfig, DatasetSpec, ShiftSource, UqMethodKind};
use super::report::{BenchmarkReport, Timing};
use crate::data::{gaussian_noise_shift, load_csv, make_splits, ood_split, Preprocessor, SplitRatios, TabularDataset};
use crate::error::{Error, Result};
use crate::models::{fit_model, KnnAnomalyModel, ModelKind, Predictor};
use crate::rng::derive_seed;
use crate::scores::{
    ConformalKind, ConformalScorer, IntrinsicKind, IntrinsicScorer, IsotonicMaxConfidence, KnnScorer, MaxConfidence,
    UncertaintyScorer,
};
use crate::tasks::{evaluate_task, ScoredSet, Task, TaskInput};

/// One report row per model: a UQ method and one of its scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    IsotonicMaxConfidence,
    ConformalPValue,
    ConformalCredibility,
    ConformalConfidence,
    Total,
    Aleatoric,
    Epistemic,
    /// Max-Confidence without UQ on error tasks, kNN distance on OoD tasks.
    Baseline,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::IsotonicMaxConfidence => "isotonic_max_confidence",
            RowKind::ConformalPValue => "conformal_p_value",
            RowKind::ConformalCredibility => "conformal_credibility",
            RowKind::ConformalConfidence => "conformal_confidence",
            RowKind::Total => "total",
            RowKind::Aleatoric => "aleatoric",
            RowKind::Epistemic => "epistemic",
            RowKind::Baseline => "baseline",
        }
    }

    pub fn method_label(self) -> &'static str {
        match self {
            RowKind::IsotonicMaxConfidence => "IC",
            RowKind::ConformalPValue | RowKind::ConformalCredibility | RowKind::ConformalConfidence => "CP",
            RowKind::Total | RowKind::Aleatoric | RowKind::Epistemic => "Intrinsic",
            RowKind::Baseline => "Baseline",
        }
    }

    pub fn score_label(self) -> &'static str {
        match self {
            RowKind::IsotonicMaxConfidence => "Max-Confidence",
            RowKind::ConformalPValue => "p-value",
            RowKind::ConformalCredibility => "Credibility",
            RowKind::ConformalConfidence => "Confidence",
            RowKind::Total => "Total",
            RowKind::Aleatoric => "Aleatoric",
            RowKind::Epistemic => "Epistemic",
            RowKind::Baseline => "★ / †",
        }
    }

    pub fn is_conformal(self) -> bool {
        self.method_label() == "CP"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub model: ModelKind,
    pub row: RowKind,
}

/// Report rows in display order.
pub fn row_keys(models: &[ModelKind], methods: &[UqMethodKind]) -> Vec<RowKey> {
    let mut keys = Vec::new();
    for &model in models {
        let mut push = |row| keys.push(RowKey { model, row });
        if methods.contains(&UqMethodKind::Isotonic) {
            push(RowKind::IsotonicMaxConfidence);
        }
        if methods.contains(&UqMethodKind::Conformal) {
            push(RowKind::ConformalPValue);
            push(RowKind::ConformalCredibility);
            push(RowKind::ConformalConfidence);
        }
        if methods.contains(&UqMethodKind::Intrinsic) && model == ModelKind::DeepEnsemble {
            push(RowKind::Total);
            push(RowKind::Aleatoric);
            push(RowKind::Epistemic);
        }
        push(RowKind::Baseline);
    }
    keys
}

/// One metric value for one dataset, seed, row and task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub dataset: String,
    pub seed: u64,
    pub model: ModelKind,
    pub row: RowKind,
    pub task: Task,
    pub value: Option<f64>,
    pub missing_reason: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
    /// Directory for per-sample score CSVs.
    pub export_scores: Option<PathBuf>,
}

/// In-distribution and OoD sides of a dataset, before seeding.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub spec: DatasetSpec,
    pub in_dist: TabularDataset,
    pub ood: TabularDataset,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<LoadedDataset> {
    let wrap = |e: Error| Error::Dataset { name: spec.name.clone(), source: Box::new(e) };
    let data = load_csv(&spec.path, &spec.label_column, &spec.label_rule, &spec.hints()).map_err(wrap)?;
    let (in_dist, ood) = ood_split(&data, &spec.split).map_err(wrap)?;
    log::info!(
        "loaded {}: {} in-distribution rows, {} OoD rows",
        spec.name,
        in_dist.n_rows(),
        ood.n_rows()
    );
    Ok(LoadedDataset { spec: spec.clone(), in_dist, ood })
}

/// Preprocessed matrices for one (dataset, seed).
#[derive(Clone, Debug)]
pub struct PreparedSeed {
    pub seed: u64,
    pub x_train: Array2<f64>,
    pub y_train: Vec<u8>,
    pub x_cal: Array2<f64>,
    pub y_cal: Vec<u8>,
    pub x_test: Array2<f64>,
    pub y_test: Vec<u8>,
    pub x_shift: Array2<f64>,
    pub y_shift: Vec<u8>,
}

pub fn prepare_seed(ds: &LoadedDataset, ratios: SplitRatios, seed: u64) -> Result<PreparedSeed> {
    let name = &ds.spec.name;
    let splits = make_splits(&ds.in_dist, &ds.ood, ratios, derive_seed(seed, &[name, "split"]))?;
    let shifted = match ds.spec.shift {
        ShiftSource::OodSplit => splits.ood.clone(),
        ShiftSource::GaussianNoise { kappa } => {
            gaussian_noise_shift(&splits.test, &splits.train, kappa, derive_seed(seed, &[name, "noise"]))?
        }
    };
    if shifted.n_rows() == 0 {
        return Err(Error::EmptyPartition("shifted"));
    }
    let pre = Preprocessor::fit(&splits.train)?;
    Ok(PreparedSeed {
        seed,
        x_train: pre.apply(&splits.train)?,
        y_train: splits.train.labels().to_vec(),
        x_cal: pre.apply(&splits.calibration)?,
        y_cal: splits.calibration.labels().to_vec(),
        x_test: pre.apply(&splits.test)?,
        y_test: splits.test.labels().to_vec(),
        x_shift: pre.apply(&shifted)?,
        y_shift: shifted.labels().to_vec(),
    })
}

type CellInput = std::result::Result<TaskInput, String>;

/// Task inputs of one report row. The baseline row uses a different scorer
/// for OoD-based tasks.
#[derive(Clone, Debug)]
pub struct ScoredRow {
    pub key: RowKey,
    pub scorer: String,
    pub input: CellInput,
    pub ood_scorer: Option<String>,
    pub ood_input: Option<CellInput>,
}

impl ScoredRow {
    pub fn input_for(&self, task: Task) -> &CellInput {
        match (&self.ood_input, task.is_error_based()) {
            (Some(ood), false) => ood,
            _ => &self.input,
        }
    }

    pub fn scorer_for(&self, task: Task) -> &str {
        match (&self.ood_scorer, task.is_error_based()) {
            (Some(name), false) => name,
            _ => &self.scorer,
        }
    }
}

fn row_scorer(
    row: RowKind,
    model: &Arc<dyn Predictor>,
    p: &PreparedSeed,
    conformal: &std::result::Result<Arc<crate::scores::ConformalState>, String>,
) -> Result<Box<dyn UncertaintyScorer>> {
    let conformal_row = |kind| -> Result<Box<dyn UncertaintyScorer>> {
        let state = conformal.clone().map_err(Error::InvalidArgument)?;
        Ok(Box::new(ConformalScorer::new(model.clone(), state, kind)?))
    };
    Ok(match row {
        RowKind::IsotonicMaxConfidence => {
            Box::new(IsotonicMaxConfidence::fit(model.clone(), p.x_cal.view(), &p.y_cal)?)
        }
        RowKind::ConformalPValue => conformal_row(ConformalKind::PValue)?,
        RowKind::ConformalCredibility => conformal_row(ConformalKind::Credibility)?,
        RowKind::ConformalConfidence => conformal_row(ConformalKind::Confidence)?,
        RowKind::Total => Box::new(IntrinsicScorer::new(model.clone(), IntrinsicKind::Total)?),
        RowKind::Aleatoric => Box::new(IntrinsicScorer::new(model.clone(), IntrinsicKind::Aleatoric)?),
        RowKind::Epistemic => Box::new(IntrinsicScorer::new(model.clone(), IntrinsicKind::Epistemic)?),
        RowKind::Baseline => Box::new(MaxConfidence::new(model.clone())),
    })
}

struct Predictions {
    test: Vec<u8>,
    shift: Vec<u8>,
}

fn scored_input(scores: (Vec<f64>, Vec<f64>), preds: &Predictions, p: &PreparedSeed, rng_seed: u64) -> CellInput {
    Ok(TaskInput {
        test: ScoredSet::new(scores.0, preds.test.clone(), p.y_test.clone()).map_err(|e| e.to_string())?,
        shifted: ScoredSet::new(scores.1, preds.shift.clone(), p.y_shift.clone()).map_err(|e| e.to_string())?,
        rng_seed,
    })
}

fn export(dir: &Path, file: String, scores: &[f64]) -> Result<()> {
    let path = dir.join(file);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Csv { path: path.clone(), source: e })?;
    let csv_err = |e| Error::Csv { path: path.clone(), source: e };
    w.write_record(["sample_id", "score"]).map_err(csv_err)?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Fits every model and scorer for one (dataset, seed) and builds the task
/// inputs of every row.
pub fn score_rows(
    ds: &LoadedDataset,
    p: &PreparedSeed,
    config: &BenchmarkConfig,
    export_dir: Option<&Path>,
) -> Result<Vec<ScoredRow>> {
    let name = &ds.spec.name;
    let seed = p.seed;
    // shared by all rows so bootstrap resamples are paired across scorers
    let rng_seed = derive_seed(seed, &[name, "bootstrap"]);
    let stem = format!("{name}_seed{seed}");

    let knn = KnnAnomalyModel::fit(p.x_train.view(), &p.y_train, config.knn_k)
        .map(|m| KnnScorer::new(Arc::new(m)))
        .map(|s| (s.score(p.x_test.view()), s.score(p.x_shift.view())))
        .map_err(|e| e.to_string());
    if let (Some(dir), Ok((t, s))) = (export_dir, &knn) {
        export(dir, format!("{stem}_knn_distance_test.csv"), t)?;
        export(dir, format!("{stem}_knn_distance_shifted.csv"), s)?;
    }

    let mut rows = Vec::new();
    for &model_kind in &config.models {
        let model_seed = derive_seed(seed, &[name.as_str(), "model", model_kind.as_str()]);
        let model = fit_model(model_kind, p.x_train.view(), &p.y_train, model_seed, &config.model_settings);
        let keys = row_keys(&[model_kind], &config.uq_methods);
        let model = match model {
            Ok(m) => m,
            Err(e) => {
                let reason = format!("{} training failed: {e}", model_kind.as_str());
                log::warn!("{name} seed {seed}: {reason}");
                for key in keys {
                    let ood = (key.row == RowKind::Baseline).then(|| Err(reason.clone()));
                    rows.push(ScoredRow {
                        key,
                        scorer: String::new(),
                        input: Err(reason.clone()),
                        ood_scorer: ood.as_ref().map(|_| "knn_distance".to_string()),
                        ood_input: ood,
                    });
                }
                continue;
            }
        };
        let preds = Predictions { test: model.predict(p.x_test.view()), shift: model.predict(p.x_shift.view()) };
        let conformal = if keys.iter().any(|k| k.row.is_conformal()) {
            ConformalScorer::fit_state(model.as_ref(), p.x_cal.view(), &p.y_cal)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        } else {
            Err("conformal state not fitted".to_string())
        };
        for key in keys {
            let scorer = row_scorer(key.row, &model, p, &conformal);
            let scorer_name = scorer.as_ref().map(|s| s.name().to_string()).unwrap_or_default();
            let input = match scorer {
                Ok(s) => {
                    let scores = (s.score(p.x_test.view()), s.score(p.x_shift.view()));
                    if let Some(dir) = export_dir {
                        let base = format!("{stem}_{}_{}", model_kind.as_str(), s.name());
                        export(dir, format!("{base}_test.csv"), &scores.0)?;
                        export(dir, format!("{base}_shifted.csv"), &scores.1)?;
                    }
                    scored_input(scores, &preds, p, rng_seed)
                }
                Err(e) => Err(e.to_string()),
            };
            let (ood_scorer, ood_input) = if key.row == RowKind::Baseline {
                let input = knn.clone().and_then(|scores| scored_input(scores, &preds, p, rng_seed));
                (Some("knn_distance".to_string()), Some(input))
            } else {
                (None, None)
            };
            rows.push(ScoredRow { key, scorer: scorer_name, input, ood_scorer, ood_input });
        }
    }
    Ok(rows)
}

fn missing_results(ds: &str, seed: u64, keys: &[RowKey], reason: &str) -> Vec<TaskResult> {
    keys.iter()
        .flat_map(|key| {
            Task::ALL.into_iter().map(move |task| TaskResult {
                dataset: ds.to_string(),
                seed,
                model: key.model,
                row: key.row,
                task,
                value: None,
                missing_reason: Some(reason.to_string()),
            })
        })
        .collect()
}

/// All task results for one (dataset, seed), rows in display order and tasks
/// in column order.
pub fn evaluate_dataset_seed(
    ds: &LoadedDataset,
    config: &BenchmarkConfig,
    seed: u64,
    export_dir: Option<&Path>,
) -> Result<Vec<TaskResult>> {
    let name = &ds.spec.name;
    let keys = row_keys(&config.models, &config.uq_methods);
    let prepared = match prepare_seed(ds, config.ratios, seed) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("{name} seed {seed}: split failed: {e}");
            return Ok(missing_results(name, seed, &keys, &format!("split failed: {e}")));
        }
    };
    let rows = score_rows(ds, &prepared, config, export_dir)?;
    let mut out = Vec::with_capacity(rows.len() * Task::ALL.len());
    for row in &rows {
        for task in Task::ALL {
            let (value, missing_reason) = match row.input_for(task) {
                Err(reason) => (None, Some(reason.clone())),
                Ok(input) => match evaluate_task(task, input, &config.tasks) {
                    Ok(Some(v)) => (Some(v), None),
                    Ok(None) => (None, Some("metric undefined for this input".to_string())),
                    Err(e) => (None, Some(e.to_string())),
                },
            };
            if let Some(reason) = &missing_reason {
                log::debug!("{name} seed {seed} {:?} {task}: missing ({reason})", row.key);
            }
            out.push(TaskResult {
                dataset: name.clone(),
                seed,
                model: row.key.model,
                row: row.key.row,
                task,
                value,
                missing_reason,
            });
        }
    }
    Ok(out)
}

fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or_default()
}

/// Runs the full grid. Dataset load failures abort; cell failures become
/// missing values.
pub fn run_benchmark(config: &BenchmarkConfig, options: &RunOptions) -> Result<BenchmarkReport> {
    config.validate()?;
    let started = unix_now();
    let datasets = config.datasets.iter().map(load_dataset).collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &options.export_scores {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let jobs: Vec<(&LoadedDataset, u64)> =
        datasets.iter().flat_map(|d| config.seeds.iter().map(move |&s| (d, s))).collect();
    let work = || -> Result<Vec<Vec<TaskResult>>> {
        jobs.par_iter()
            .map(|(ds, seed)| evaluate_dataset_seed(ds, config, *seed, options.export_scores.as_deref()))
            .collect()
    };
    let per_job = match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let results: Vec<TaskResult> = per_job.into_iter().flatten().collect();
    let mut report = BenchmarkReport::from_results(config, results);
    report.timing = Some(Timing { started_unix: started, finished_unix: unix_now() });
    Ok(report)
}
