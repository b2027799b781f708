use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnData, ColumnKind, ColumnSchema, TabularDataset};
use crate::error::{Error, Result};

/// How raw label strings become {0, 1}.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelRule {
    /// Exactly two distinct values; the larger one (numerically if both
    /// parse as numbers, else lexicographically) is the positive class.
    #[default]
    TwoValued,
    /// Listed values are positive, everything else negative.
    Positive { values: Vec<String> },
    /// One-vs-all with the most frequent value as the positive class.
    /// Frequency ties go to the lexicographically smallest value.
    MajorityVsRest,
}

impl LabelRule {
    fn binarize(&self, column: &str, raw: &[String]) -> Result<Vec<u8>> {
        let positive: BTreeSet<&str> = match self {
            LabelRule::Positive { values } => values.iter().map(String::as_str).collect(),
            LabelRule::MajorityVsRest => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for v in raw {
                    *counts.entry(v.as_str()).or_default() += 1;
                }
                // BTreeMap iterates in key order, so max_by_key keeps the
                // last maximum; reverse to prefer the smallest key on ties.
                let majority = counts
                    .iter()
                    .rev()
                    .max_by_key(|(_, &c)| c)
                    .map(|(k, _)| *k)
                    .unwrap_or_default();
                BTreeSet::from([majority])
            }
            LabelRule::TwoValued => {
                let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
                if distinct.len() > 2 {
                    return Err(Error::NonBinaryLabels {
                        column: column.to_string(),
                        distinct: distinct.len(),
                    });
                }
                let values: Vec<&str> = distinct.into_iter().collect();
                if values.len() < 2 {
                    // single-valued: keep a numeric 0/1 where possible
                    let v = values[0];
                    return Ok(vec![u8::from(v.parse::<f64>().is_ok_and(|x| x > 0.0)); raw.len()]);
                }
                let larger = match (values[0].parse::<f64>(), values[1].parse::<f64>()) {
                    (Ok(a), Ok(b)) if b < a => values[0],
                    _ => values[1],
                };
                BTreeSet::from([larger])
            }
        };
        Ok(raw.iter().map(|v| u8::from(positive.contains(v.as_str()))).collect())
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "?"
}

/// Reads a headered CSV into a dataset. Kinds are inferred (numeric when
/// every value parses as a finite number) unless `hints` names the column.
/// The dataset takes the file stem as its name.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    rule: &LabelRule,
    hints: &HashMap<String, ColumnKind>,
) -> Result<TabularDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow { row, found: record.len(), expected: header.len() });
        }
        for (j, field) in record.iter().enumerate() {
            if is_missing(field) {
                return Err(Error::MissingValue { column: header[j].clone(), row });
            }
            raw[j].push(field.to_string());
        }
    }
    if raw[label_idx].is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no data rows", path.display())));
    }
    let labels = rule.binarize(label_column, &raw[label_idx])?;

    let mut columns = Vec::with_capacity(header.len() - 1);
    let mut data = Vec::with_capacity(header.len() - 1);
    for (j, (name, values)) in header.into_iter().zip(raw).enumerate() {
        if j == label_idx {
            continue;
        }
        let parsed: Option<Vec<f64>> = values
            .iter()
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect();
        let kind = match hints.get(&name) {
            Some(&k) => k,
            None if parsed.is_some() => ColumnKind::Numeric,
            None => ColumnKind::Categorical,
        };
        match kind {
            ColumnKind::Numeric => {
                let Some(nums) = parsed else {
                    let (row, value) = values
                        .iter()
                        .enumerate()
                        .find(|(_, v)| v.parse::<f64>().map_or(true, |x| !x.is_finite()))
                        .map(|(i, v)| (i, v.clone()))
                        .unwrap_or_default();
                    return Err(Error::NotNumeric { column: name, row, value });
                };
                columns.push(ColumnSchema { name, kind, categories: Vec::new() });
                data.push(ColumnData::Numeric(nums));
            }
            ColumnKind::Categorical => {
                let categories: BTreeSet<String> = values.iter().cloned().collect();
                columns.push(ColumnSchema { name, kind, categories: categories.into_iter().collect() });
                data.push(ColumnData::Categorical(values));
            }
        }
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    TabularDataset::new(name, columns, data, labels)
}
