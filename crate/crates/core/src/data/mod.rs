//! Tabular datasets: loading, OoD splitting, partitioning and preprocessing.

mod load;
mod preprocess;
mod split;

pub use load::{load_csv, LabelRule};
pub use preprocess::{FittedColumn, Preprocessor};
pub use split::{
    bootstrap, gaussian_noise_shift, make_splits, ood_split, DataSplits, OodSelector, SplitRatios,
    SplitSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Name and kind of one feature column. `categories` is the sorted set of
/// labels observed when the column was built; empty for numeric columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub categories: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// A single raw cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
}

/// Raw feature table plus binary labels. Stored column-major; immutable
/// once built, every operation returns a new dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    name: String,
    columns: Vec<ColumnSchema>,
    data: Vec<ColumnData>,
    labels: Vec<u8>,
}

impl TabularDataset {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<ColumnSchema>,
        data: Vec<ColumnData>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("dataset must have at least one row".into()));
        }
        if columns.len() != data.len() {
            return Err(Error::InvalidArgument(format!(
                "{} column schemas for {} data columns",
                columns.len(),
                data.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        for (schema, col) in columns.iter().zip(&data) {
            if col.len() != labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has {} rows, labels have {}",
                    schema.name,
                    col.len(),
                    labels.len()
                )));
            }
            if col.kind() != schema.kind {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` data does not match its declared kind",
                    schema.name
                )));
            }
        }
        Ok(Self { name: name.into(), columns, data, labels })
    }

    /// Builds an all-numeric dataset from row vectors; feature names are `x0..`.
    pub fn from_numeric_rows(name: &str, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::RaggedRow { row: i, found: r.len(), expected: width });
        }
        let columns = (0..width)
            .map(|j| ColumnSchema {
                name: format!("x{j}"),
                kind: ColumnKind::Numeric,
                categories: Vec::new(),
            })
            .collect();
        let data = (0..width)
            .map(|j| ColumnData::Numeric(rows.iter().map(|r| r[j]).collect()))
            .collect();
        Self::new(name, columns, data, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn column_data(&self, index: usize) -> &ColumnData {
        &self.data[index]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.data
            .iter()
            .map(|col| match col {
                ColumnData::Numeric(v) => Value::Num(v[i]),
                ColumnData::Categorical(v) => Value::Cat(v[i].clone()),
            })
            .collect()
    }

    /// Number of rows per label, indexed by class.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rows at `indices`, in that order (repeats allowed). Category lists
    /// keep the parent's full schema.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("row selection is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_rows()) {
            return Err(Error::InvalidArgument(format!("row index {bad} out of range")));
        }
        Ok(Self {
            name: self.name.clone(),
            columns: self.columns.clone(),
            data: self.data.iter().map(|c| c.select(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }

    pub fn drop_column(&self, name: &str) -> Result<Self> {
        let idx = self.column_index(name).ok_or_else(|| Error::UnknownFeature(name.into()))?;
        let mut out = self.clone();
        out.columns.remove(idx);
        out.data.remove(idx);
        Ok(out)
    }

    /// Stacks `other` below `self`. Both must share column names and kinds.
    pub fn concat(&self, other: &TabularDataset) -> Result<Self> {
        let same = self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind);
        if !same {
            return Err(Error::InvalidArgument("cannot concatenate datasets with different schemas".into()));
        }
        let mut columns = self.columns.clone();
        for (c, o) in columns.iter_mut().zip(&other.columns) {
            if c.kind == ColumnKind::Categorical {
                let mut cats: std::collections::BTreeSet<String> = c.categories.iter().cloned().collect();
                cats.extend(o.categories.iter().cloned());
                c.categories = cats.into_iter().collect();
            }
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| match (a, b) {
                (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                    ColumnData::Numeric(x.iter().chain(y).copied().collect())
                }
                (ColumnData::Categorical(x), ColumnData::Categorical(y)) => {
                    ColumnData::Categorical(x.iter().chain(y).cloned().collect())
                }
                _ => unreachable!("kinds checked above"),
            })
            .collect();
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        Ok(Self { name: self.name.clone(), columns, data, labels })
    }
}
