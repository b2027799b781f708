use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ColumnData, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::{bootstrap_indices, rng_from_seed};

/// Which rows of the split feature count as out-of-distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodSelector {
    /// Exact matches. On numeric columns the labels are parsed as numbers.
    Values(Vec<String>),
    /// Numeric rows strictly above the threshold.
    Above(f64),
    /// Numeric rows strictly below the threshold.
    Below(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub feature: String,
    pub ood: OodSelector,
    #[serde(default = "default_true")]
    pub drop_feature: bool,
}

fn default_true() -> bool {
    true
}

impl SplitSpec {
    pub fn values(feature: &str, values: &[&str]) -> Self {
        Self {
            feature: feature.to_string(),
            ood: OodSelector::Values(values.iter().map(|v| v.to_string()).collect()),
            drop_feature: true,
        }
    }

    fn ood_mask(&self, data: &TabularDataset) -> Result<Vec<bool>> {
        let idx = data
            .column_index(&self.feature)
            .ok_or_else(|| Error::UnknownFeature(self.feature.clone()))?;
        let mask = match (data.column_data(idx), &self.ood) {
            (ColumnData::Categorical(v), OodSelector::Values(vals)) => {
                v.iter().map(|x| vals.iter().any(|o| o == x)).collect()
            }
            (ColumnData::Numeric(v), OodSelector::Values(vals)) => {
                let targets = vals
                    .iter()
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| {
                            Error::InvalidArgument(format!(
                                "OoD value `{s}` is not numeric but `{}` is a numeric column",
                                self.feature
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                v.iter().map(|x| targets.contains(x)).collect()
            }
            (ColumnData::Numeric(v), OodSelector::Above(t)) => v.iter().map(|x| x > t).collect(),
            (ColumnData::Numeric(v), OodSelector::Below(t)) => v.iter().map(|x| x < t).collect(),
            (ColumnData::Categorical(_), _) => {
                return Err(Error::InvalidArgument(format!(
                    "threshold selector used on categorical feature `{}`",
                    self.feature
                )))
            }
        };
        Ok(mask)
    }
}

/// Splits rows into (in-distribution, OoD) by the spec's feature values and
/// drops the split feature from both sides when `drop_feature` is set.
pub fn ood_split(data: &TabularDataset, spec: &SplitSpec) -> Result<(TabularDataset, TabularDataset)> {
    let mask = spec.ood_mask(data)?;
    let (ood_rows, in_rows): (Vec<usize>, Vec<usize>) = (0..data.n_rows()).partition(|&i| mask[i]);
    if ood_rows.is_empty() {
        return Err(Error::EmptyPartition("out-of-distribution"));
    }
    if in_rows.is_empty() {
        return Err(Error::EmptyPartition("in-distribution"));
    }
    let mut in_dist = data.select_rows(&in_rows)?;
    let mut ood = data.select_rows(&ood_rows)?;
    if spec.drop_feature {
        in_dist = in_dist.drop_column(&spec.feature)?;
        ood = ood.drop_column(&spec.feature)?;
    }
    let name = data.name();
    Ok((in_dist.with_name(format!("{name}/in")), ood.with_name(format!("{name}/ood"))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub calibration: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.6, calibration: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, calibration: f64, test: f64) -> Result<Self> {
        let r = Self { train, calibration, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.calibration, self.test];
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidRatios(format!("{parts:?} must all be positive")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("{parts:?} must sum to 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DataSplits {
    pub train: TabularDataset,
    pub calibration: TabularDataset,
    pub test: TabularDataset,
    pub ood: TabularDataset,
    pub seed: u64,
}

/// Largest-remainder apportionment of `total` across classes proportional to
/// `weights`, never exceeding `capacity`.
fn apportion(total: usize, weights: &[usize], capacity: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let mut alloc: Vec<usize> = weights
        .iter()
        .zip(capacity)
        .map(|(&w, &cap)| ((total * w) / sum).min(cap))
        .collect();
    let mut remaining = total - alloc.iter().sum::<usize>();
    // fractional parts, largest first; class index breaks ties
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse((total * weights[c]) % sum));
    while remaining > 0 {
        let mut progressed = false;
        for &c in &order {
            if remaining > 0 && alloc[c] < capacity[c] {
                alloc[c] += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    alloc
}

/// Stratified train/calibration/test partition of the in-distribution rows.
/// Sizes are `round(ratio * n)` for calibration and test, the rest train;
/// each partition's per-class counts are apportioned proportionally.
pub fn make_splits(
    in_dist: &TabularDataset,
    ood: &TabularDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DataSplits> {
    ratios.validate()?;
    let n = in_dist.n_rows();
    let n_cal = (ratios.calibration * n as f64).round() as usize;
    let n_test = (ratios.test * n as f64).round() as usize;
    if n_cal == 0 {
        return Err(Error::EmptyPartition("calibration"));
    }
    if n_test == 0 {
        return Err(Error::EmptyPartition("test"));
    }
    if n_cal + n_test >= n {
        return Err(Error::EmptyPartition("train"));
    }

    let mut rng = rng_from_seed(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, &l) in in_dist.labels().iter().enumerate() {
        by_class[l as usize].push(i);
    }
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let cal_alloc = apportion(n_cal, &counts, &counts);
    let left: Vec<usize> = counts.iter().zip(&cal_alloc).map(|(c, a)| c - a).collect();
    let test_alloc = apportion(n_test, &counts, &left);

    let (mut train, mut cal, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (c, rows) in by_class.iter().enumerate() {
        let (a, rest) = rows.split_at(cal_alloc[c]);
        let (b, rest) = rest.split_at(test_alloc[c]);
        cal.extend_from_slice(a);
        test.extend_from_slice(b);
        train.extend_from_slice(rest);
    }
    for part in [&mut train, &mut cal, &mut test] {
        part.sort_unstable();
    }
    let train = in_dist.select_rows(&train)?;
    for class in 0..2u8 {
        if counts[class as usize] > 0 && train.class_counts()[class as usize] == 0 {
            return Err(Error::ClassAbsent(class));
        }
    }
    Ok(DataSplits {
        train,
        calibration: in_dist.select_rows(&cal)?,
        test: in_dist.select_rows(&test)?,
        ood: ood.clone(),
        seed,
    })
}

/// Resample of `data.n_rows()` rows with replacement.
pub fn bootstrap(data: &TabularDataset, seed: u64) -> Result<TabularDataset> {
    data.select_rows(&bootstrap_indices(data.n_rows(), seed))
}

/// Synthetic covariate shift: each numeric feature gets additive Gaussian
/// noise with standard deviation `kappa` times that feature's standard
/// deviation in `reference`. Categorical columns are untouched.
pub fn gaussian_noise_shift(
    data: &TabularDataset,
    reference: &TabularDataset,
    kappa: f64,
    seed: u64,
) -> Result<TabularDataset> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise scale {kappa} must be non-negative")));
    }
    let mut rng = rng_from_seed(seed);
    let mut columns = Vec::with_capacity(data.n_features());
    for (j, schema) in data.columns().iter().enumerate() {
        let col = match data.column_data(j) {
            ColumnData::Numeric(values) => {
                let ref_idx = reference
                    .column_index(&schema.name)
                    .ok_or_else(|| Error::UnknownFeature(schema.name.clone()))?;
                let ColumnData::Numeric(ref_values) = reference.column_data(ref_idx) else {
                    return Err(Error::InvalidArgument(format!(
                        "reference column `{}` is not numeric",
                        schema.name
                    )));
                };
                let n = ref_values.len() as f64;
                let mean = ref_values.iter().sum::<f64>() / n;
                let std = (ref_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                let noise = Normal::new(0.0, kappa * std)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                ColumnData::Numeric(values.iter().map(|v| v + noise.sample(&mut rng)).collect())
            }
            other => other.clone(),
        };
        columns.push(col);
    }
    TabularDataset::new(
        format!("{}/noise{kappa}", data.name()),
        data.columns().to_vec(),
        columns,
        data.labels().to_vec(),
    )
}
