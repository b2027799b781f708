use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::presets::preset;
use crate::data::{ColumnKind, LabelRule, SplitRatios, SplitSpec};
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSettings};
use crate::tasks::TaskParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UqMethodKind {
    Isotonic,
    Conformal,
    Intrinsic,
}

/// One `[[datasets]]` entry as written in the config file. A `preset`
/// supplies defaults for the label column, label rule and split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: Option<String>,
    pub preset: Option<String>,
    pub path: PathBuf,
    pub label_column: Option<String>,
    pub label_rule: Option<LabelRule>,
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub schema_hints: BTreeMap<String, ColumnKind>,
    /// Replace the feature-split shifted set by the test set with Gaussian
    /// feature noise of this relative scale.
    pub gaussian_shift: Option<f64>,
}

/// Where the shifted data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSource {
    /// The OoD side of the feature split.
    OodSplit,
    GaussianNoise { kappa: f64 },
}

/// Fully resolved dataset description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub label_column: String,
    pub label_rule: LabelRule,
    pub split: SplitSpec,
    pub schema_hints: BTreeMap<String, ColumnKind>,
    pub shift: ShiftSource,
}

impl DatasetSpec {
    pub fn hints(&self) -> HashMap<String, ColumnKind> {
        self.schema_hints.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Logistic]
}

fn default_methods() -> Vec<UqMethodKind> {
    vec![UqMethodKind::Isotonic, UqMethodKind::Conformal, UqMethodKind::Intrinsic]
}

fn default_knn_k() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_methods")]
    pub uq_methods: Vec<UqMethodKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default)]
    pub tasks: TaskParams,
    #[serde(default)]
    pub model_settings: ModelSettings,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub datasets: Vec<DatasetSpec>,
    pub models: Vec<ModelKind>,
    pub uq_methods: Vec<UqMethodKind>,
    pub seeds: Vec<u64>,
    pub ratios: SplitRatios,
    pub tasks: TaskParams,
    pub model_settings: ModelSettings,
    pub knn_k: usize,
    pub output_dir: PathBuf,
}

impl BenchmarkConfig {
    /// Reads a TOML config. Relative paths resolve against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::resolve(raw, &base)
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::resolve(raw, base)
    }

    pub fn resolve(raw: RawConfig, base: &Path) -> Result<Self> {
        let datasets = raw
            .datasets
            .into_iter()
            .map(|entry| resolve_dataset(entry, base))
            .collect::<Result<Vec<_>>>()?;
        let output_dir = if raw.output_dir.is_absolute() { raw.output_dir } else { base.join(raw.output_dir) };
        let config = Self {
            datasets,
            models: raw.models,
            uq_methods: raw.uq_methods,
            seeds: raw.seeds,
            ratios: raw.ratios,
            tasks: raw.tasks,
            model_settings: raw.model_settings,
            knn_k: raw.knn_k,
            output_dir,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut models = self.models.clone();
        models.sort_unstable();
        models.dedup();
        if models.len() != self.models.len() {
            return Err(Error::Config("a model is listed twice".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("dataset name `{}` used twice", w[0])));
        }
        for d in &self.datasets {
            if !d.path.is_file() {
                return Err(Error::Config(format!("dataset `{}`: file {} not found", d.name, d.path.display())));
            }
        }
        self.ratios.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.tasks.retention_grid < 2 || self.tasks.n_bootstrap == 0 {
            return Err(Error::Config("retention_grid must be >= 2 and n_bootstrap >= 1".into()));
        }
        if !(self.tasks.alpha > 0.0 && self.tasks.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.tasks.alpha)));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        if self.models.contains(&crate::models::ModelKind::DeepEnsemble) && self.model_settings.ensemble_size < 2 {
            return Err(Error::Config("ensemble_size must be at least 2".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn resolve_dataset(entry: DatasetEntry, base: &Path) -> Result<DatasetSpec> {
    let p = match &entry.preset {
        Some(name) => Some(preset(name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?),
        None => None,
    };
    let name = entry
        .name
        .or_else(|| p.as_ref().map(|p| p.name.to_string()))
        .or_else(|| entry.path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .ok_or_else(|| Error::Config("dataset needs a name".into()))?;
    let label_column = entry
        .label_column
        .or_else(|| p.as_ref().and_then(|p| p.label_column.map(str::to_string)))
        .ok_or_else(|| Error::Config(format!("dataset `{name}`: label_column is required")))?;
    let label_rule = entry.label_rule.or_else(|| p.as_ref().map(|p| p.label_rule.clone())).unwrap_or_default();
    let split = entry
        .split
        .or_else(|| p.as_ref().map(|p| p.split.clone()))
        .ok_or_else(|| Error::Config(format!("dataset `{name}`: split is required")))?;
    let shift = match entry.gaussian_shift {
        Some(kappa) if kappa >= 0.0 => ShiftSource::GaussianNoise { kappa },
        Some(kappa) => return Err(Error::Config(format!("dataset `{name}`: gaussian_shift {kappa} is negative"))),
        None => ShiftSource::OodSplit,
    };
    let path = if entry.path.is_absolute() { entry.path } else { base.join(entry.path) };
    Ok(DatasetSpec { name, path, label_column, label_rule, split, schema_hints: entry.schema_hints, shift })
}
