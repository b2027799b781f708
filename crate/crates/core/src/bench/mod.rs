//! Orchestration of the full benchmark grid, aggregation and report output.

mod aggregate;
mod config;
mod presets;
mod report;
mod run;

pub use aggregate::{aggregate, apply_bolding, bold_flags, AggregateCell};
pub use config::{BenchmarkConfig, DatasetEntry, DatasetSpec, RawConfig, ShiftSource, UqMethodKind};
pub use presets::{preset, presets, Preset};
pub use report::{emit_report, BenchmarkReport, ReportFormat, Timing};
pub use run::{
    evaluate_dataset_seed, load_dataset, prepare_seed, row_keys, run_benchmark, score_rows, LoadedDataset,
    PreparedSeed, RowKey, RowKind, RunOptions, ScoredRow, TaskResult,
};
