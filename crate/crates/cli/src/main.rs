use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uqbench::bench::{
    emit_report, load_dataset, prepare_seed, run_benchmark, score_rows, BenchmarkConfig, BenchmarkReport,
    ReportFormat, RunOptions,
};
use uqbench::models::ModelKind;
use uqbench::tasks::{evaluate_task, Task};

/// Benchmark uncertainty scores on retention, error, OoD, shift and
/// performance-drop tasks.
#[derive(Parser)]
#[command(name = "uqbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full benchmark and write reports.
    Run(RunArgs),
    /// Evaluate a single (dataset, seed, model, row, task) cell.
    Task(TaskArgs),
    /// Re-render reports from a stored report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Comma-separated seeds overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads.
    #[arg(long, short)]
    jobs: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "markdown,csv,json")]
    formats: Vec<ReportFormat>,
    /// Also write per-sample scores under <output>/scores.
    #[arg(long)]
    export_scores: bool,
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    model: ModelKind,
    /// Row name, e.g. conformal_p_value or baseline.
    #[arg(long)]
    row: String,
    #[arg(long)]
    task: Task,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a report.json written by `run`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "markdown,csv")]
    formats: Vec<ReportFormat>,
}

enum Outcome {
    Complete,
    Partial(usize),
}

fn run(args: RunArgs) -> uqbench::Result<Outcome> {
    let mut config = BenchmarkConfig::from_file(&args.config)?;
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(out) = args.output {
        config.output_dir = out;
    }
    config.validate()?;
    let options = RunOptions {
        jobs: args.jobs,
        export_scores: args.export_scores.then(|| config.output_dir.join("scores")),
    };
    let report = run_benchmark(&config, &options)?;
    for path in emit_report(&report, &config.output_dir, &args.formats)? {
        println!("wrote {}", path.display());
    }
    if args.formats.contains(&ReportFormat::Markdown) {
        print!("{}", report.to_markdown());
    }
    Ok(outcome(&report))
}

fn outcome(report: &BenchmarkReport) -> Outcome {
    match report.missing_count() {
        0 => Outcome::Complete,
        n => Outcome::Partial(n),
    }
}

fn task(args: TaskArgs) -> uqbench::Result<Outcome> {
    let config = BenchmarkConfig::from_file(&args.config)?;
    let spec = config
        .datasets
        .iter()
        .find(|d| d.name == args.dataset)
        .ok_or_else(|| uqbench::Error::Config(format!("no dataset named `{}`", args.dataset)))?;
    let mut config = config.clone();
    config.models = vec![args.model];
    let ds = load_dataset(spec)?;
    let prepared = prepare_seed(&ds, config.ratios, args.seed)?;
    let rows = score_rows(&ds, &prepared, &config, None)?;
    let row = rows
        .iter()
        .find(|r| r.key.row.as_str() == args.row)
        .ok_or_else(|| uqbench::Error::InvalidArgument(format!("no row `{}` for this model", args.row)))?;
    let input = row.input_for(args.task).as_ref().map_err(|e| uqbench::Error::InvalidArgument(e.clone()))?;
    match evaluate_task(args.task, input, &config.tasks)? {
        Some(v) => {
            println!("{} {} seed {} {} {}: {v}", args.dataset, args.model.as_str(), args.seed, args.row, args.task);
            Ok(Outcome::Complete)
        }
        None => {
            println!("{} {} seed {} {} {}: missing", args.dataset, args.model.as_str(), args.seed, args.row, args.task);
            Ok(Outcome::Partial(1))
        }
    }
}

fn report(args: ReportArgs) -> uqbench::Result<Outcome> {
    let mut report = BenchmarkReport::load(&args.input)?;
    report.cells = report.recompute();
    for path in emit_report(&report, &args.output, &args.formats)? {
        println!("wrote {}", path.display());
    }
    Ok(outcome(&report))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Task(a) => task(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("{n} missing values");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_run_flags() {
        let cli = Cli::try_parse_from([
            "uqbench", "run", "--config", "c.toml", "--seeds", "1,2", "--jobs", "3", "--formats", "json",
        ])
        .unwrap();
        let Command::Run(a) = cli.command else { panic!("expected run") };
        assert_eq!(a.seeds, Some(vec![1, 2]));
        assert_eq!(a.jobs, Some(3));
        assert_eq!(a.formats, vec![ReportFormat::Json]);
        assert!(Cli::try_parse_from(["uqbench", "run", "--config", "c", "--formats", "pdf"]).is_err());
    }

}
