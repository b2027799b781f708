use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, AggregateCell};
use super::config::BenchmarkConfig;
use super::run::{row_keys, RowKey, RowKind, TaskResult};
use crate::error::{Error, Result};
use crate::tasks::{Direction, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config_hash: String,
    pub datasets: Vec<String>,
    pub seeds: Vec<u64>,
    pub rows: Vec<RowKey>,
    pub cells: Vec<AggregateCell>,
    pub results: Vec<TaskResult>,
    /// Written to a separate provenance file so report bodies stay
    /// reproducible.
    #[serde(skip)]
    pub timing: Option<Timing>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    dataset: &'a str,
    seed: u64,
    model: &'static str,
    uq_method: &'static str,
    score: &'static str,
    task: &'static str,
    value: Option<f64>,
    missing_flag: bool,
    missing_reason: &'a str,
}

impl BenchmarkReport {
    pub fn from_results(config: &BenchmarkConfig, results: Vec<TaskResult>) -> Self {
        let datasets: Vec<String> = config.datasets.iter().map(|d| d.name.clone()).collect();
        let rows = row_keys(&config.models, &config.uq_methods);
        let cells = aggregate(&rows, &datasets, &config.seeds, &results);
        Self {
            config_hash: config.hash(),
            datasets,
            seeds: config.seeds.clone(),
            rows,
            cells,
            results,
            timing: None,
        }
    }

    /// Aggregates rebuilt from the stored per-seed results.
    pub fn recompute(&self) -> Vec<AggregateCell> {
        aggregate(&self.rows, &self.datasets, &self.seeds, &self.results)
    }

    pub fn missing_count(&self) -> usize {
        self.results.iter().filter(|r| r.value.is_none()).count()
    }

    pub fn cell(&self, key: RowKey, task: Task) -> Option<&AggregateCell> {
        self.cells.iter().find(|c| c.key == key && c.task == task)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let arrow = |t: Task| match t.direction() {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
        };
        out.push_str("| Model | UQ method | Score |");
        for t in Task::ALL {
            let _ = write!(out, " {} {} |", t.title(), arrow(t));
        }
        out.push_str("\n|---|---|---|");
        out.push_str(&"---|".repeat(Task::ALL.len()));
        out.push('\n');
        for &key in &self.rows {
            let _ = write!(
                out,
                "| {} | {} | {} |",
                key.model.display_name(),
                key.row.method_label(),
                key.row.score_label()
            );
            for task in Task::ALL {
                let text = match self.cell(key, task) {
                    Some(AggregateCell { mean: Some(m), std, bold, .. }) => {
                        let marker = match (key.row, task.is_error_based()) {
                            (RowKind::Baseline, true) => " ★",
                            (RowKind::Baseline, false) => " †",
                            _ => "",
                        };
                        let body = format!("{m:.3} ± {:.3}{marker}", std.unwrap_or(0.0));
                        if *bold {
                            format!("**{body}**")
                        } else {
                            body
                        }
                    }
                    _ => "n/a".to_string(),
                };
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
        let _ = write!(
            out,
            "\n★ Max-Confidence of the primary model without UQ. † kNN distance to same-label training points.\n\
             Bold: the ±σ interval overlaps the best performer's (per model for error-based tasks).\n\
             Datasets: {}. Seeds: {}. Missing values: {}.\n",
            self.datasets.join(", "),
            self.seeds.len(),
            self.missing_count()
        );
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let as_csv = |e: csv::Error| Error::Csv { path: PathBuf::from("<report>"), source: e };
        for r in &self.results {
            w.serialize(CsvRow {
                dataset: &r.dataset,
                seed: r.seed,
                model: r.model.as_str(),
                uq_method: r.row.method_label(),
                score: r.row.as_str(),
                task: r.task.as_str(),
                value: r.value,
                missing_flag: r.value.is_none(),
                missing_reason: r.missing_reason.as_deref().unwrap_or(""),
            })
            .map_err(as_csv)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn provenance_json(&self) -> Result<String> {
        let value = serde_json::json!({
            "config_hash": self.config_hash,
            "datasets": self.datasets,
            "seeds": self.seeds,
            "started_unix": self.timing.map(|t| t.started_unix),
            "finished_unix": self.timing.map(|t| t.finished_unix),
            "missing_values": self.missing_count(),
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

/// Writes the requested formats into `dir` and returns the written paths.
/// `provenance.json` is always written alongside.
pub fn emit_report(report: &BenchmarkReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            ReportFormat::Markdown => write("report.md", report.to_markdown())?,
            ReportFormat::Csv => write("results.csv", report.to_csv()?)?,
            ReportFormat::Json => write("report.json", report.to_json()?)?,
        }
    }
    write("provenance.json", report.provenance_json()?)?;
    Ok(written)
}
