use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::run::{RowKey, TaskResult};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::tasks::{Direction, Task};

/// Mean and spread of one (row, task) over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub key: RowKey,
    pub task: Task,
    /// `None` when every (dataset, seed) value is missing.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_effective: usize,
    pub missing: usize,
    pub bold: bool,
    pub direction: Direction,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Per seed, the mean over datasets with a value; then mean and standard
/// deviation of those per-seed means.
pub fn aggregate(
    rows: &[RowKey],
    datasets: &[String],
    seeds: &[u64],
    results: &[TaskResult],
) -> Vec<AggregateCell> {
    let mut by_cell: HashMap<(RowKey, Task, u64), Vec<f64>> = HashMap::new();
    for r in results {
        if let Some(v) = r.value {
            by_cell.entry((RowKey { model: r.model, row: r.row }, r.task, r.seed)).or_default().push(v);
        }
    }
    let expected = datasets.len() * seeds.len();
    let mut cells = Vec::with_capacity(rows.len() * Task::ALL.len());
    for &key in rows {
        for task in Task::ALL {
            let mut per_seed = Vec::new();
            let mut n_effective = 0;
            for &seed in seeds {
                if let Some(values) = by_cell.get(&(key, task, seed)) {
                    n_effective += values.len();
                    per_seed.push(mean(values));
                }
            }
            let (m, s) = if per_seed.is_empty() { (None, None) } else { (Some(mean(&per_seed)), Some(std_dev(&per_seed))) };
            cells.push(AggregateCell {
                key,
                task,
                mean: m,
                std: s,
                n_effective,
                missing: expected - n_effective,
                bold: false,
                direction: task.direction(),
            });
        }
    }
    apply_bolding(&mut cells);
    cells
}

/// Bold flags for one group of `(mean, std)`: a cell is bold when its
/// `[m - s, m + s]` interval overlaps the best cell's interval.
pub fn bold_flags(cells: &[(f64, f64)], direction: Direction) -> Result<Vec<bool>> {
    let better = |a: f64, b: f64| match direction {
        Direction::HigherBetter => a > b,
        Direction::LowerBetter => a < b,
    };
    let (first, rest) = cells.split_first().ok_or_else(|| Error::InvalidArgument("empty bolding group".into()))?;
    let mut best = *first;
    for &c in rest {
        if better(c.0, best.0) {
            best = c;
        }
    }
    Ok(cells.iter().map(|&(m, s)| m - s <= best.0 + best.1 && best.0 - best.1 <= m + s).collect())
}

/// Error-based tasks are bolded within each primary model, OoD-based tasks
/// across all rows.
pub fn apply_bolding(cells: &mut [AggregateCell]) {
    let mut groups: HashMap<(Task, Option<ModelKind>), Vec<usize>> = HashMap::new();
    for (i, c) in cells.iter_mut().enumerate() {
        c.bold = false;
        if c.mean.is_some() {
            let model = c.task.is_error_based().then_some(c.key.model);
            groups.entry((c.task, model)).or_default().push(i);
        }
    }
    for ((task, _), idx) in groups {
        let stats: Vec<(f64, f64)> =
            idx.iter().map(|&i| (cells[i].mean.unwrap(), cells[i].std.unwrap_or(0.0))).collect();
        let flags = bold_flags(&stats, task.direction()).expect("group is non-empty");
        for (i, b) in idx.into_iter().zip(flags) {
            cells[i].bold = b;
        }
    }
}
