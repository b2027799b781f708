use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ColumnData, TabularDataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedColumn {
    /// `(x - mean) / scale`; scale is 1 for zero-variance columns.
    Standardize { name: String, mean: f64, scale: f64 },
    /// One indicator per training category; unseen values encode as all zeros.
    OneHot { name: String, categories: Vec<String> },
}

impl FittedColumn {
    fn name(&self) -> &str {
        match self {
            FittedColumn::Standardize { name, .. } | FittedColumn::OneHot { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            FittedColumn::Standardize { .. } => 1,
            FittedColumn::OneHot { categories, .. } => categories.len(),
        }
    }
}

/// Z-scores numeric columns and one-hot encodes categoricals, using
/// statistics from the training partition only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    columns: Vec<FittedColumn>,
}

impl Preprocessor {
    pub fn fit(train: &TabularDataset) -> Result<Self> {
        let columns = train
            .columns()
            .iter()
            .enumerate()
            .map(|(j, schema)| match train.column_data(j) {
                ColumnData::Numeric(v) => {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    let std = var.sqrt();
                    let scale = if std > 0.0 && std.is_finite() { std } else { 1.0 };
                    FittedColumn::Standardize { name: schema.name.clone(), mean, scale }
                }
                ColumnData::Categorical(v) => {
                    let cats: BTreeSet<&String> = v.iter().collect();
                    FittedColumn::OneHot {
                        name: schema.name.clone(),
                        categories: cats.into_iter().cloned().collect(),
                    }
                }
            })
            .collect();
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[FittedColumn] {
        &self.columns
    }

    pub fn output_width(&self) -> usize {
        self.columns.iter().map(FittedColumn::width).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| match c {
                FittedColumn::Standardize { name, .. } => vec![name.clone()],
                FittedColumn::OneHot { name, categories } => {
                    categories.iter().map(|cat| format!("{name}={cat}")).collect()
                }
            })
            .collect()
    }

    /// Hex SHA-256 over the output feature names; identifies the encoded layout.
    pub fn schema_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for name in self.feature_names() {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply(&self, data: &TabularDataset) -> Result<Array2<f64>> {
        let mut out = Array2::<f64>::zeros((data.n_rows(), self.output_width()));
        let mut offset = 0;
        for fitted in &self.columns {
            let idx = data
                .column_index(fitted.name())
                .ok_or_else(|| Error::UnknownFeature(fitted.name().to_string()))?;
            match (fitted, data.column_data(idx)) {
                (FittedColumn::Standardize { mean, scale, .. }, ColumnData::Numeric(v)) => {
                    for (i, x) in v.iter().enumerate() {
                        out[[i, offset]] = (x - mean) / scale;
                    }
                }
                (FittedColumn::OneHot { categories, .. }, ColumnData::Categorical(v)) => {
                    for (i, x) in v.iter().enumerate() {
                        if let Ok(k) = categories.binary_search(x) {
                            out[[i, offset + k]] = 1.0;
                        }
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "column `{}` changed kind since the preprocessor was fit",
                        fitted.name()
                    )))
                }
            }
            offset += fitted.width();
        }
        Ok(out)
    }
}
