//! flowforge — build labeled, CICFlowMeter-compatible flow datasets from
//! raw packet captures and MAWILab-style anomaly annotations.
//!
//! Verbs mirror the pipeline: `ingest` stages raw files into the hive
//! tree, `run` executes the per-day stages with content-hash caching,
//! `stats` summarizes daily tables, `sample` draws a fixed number of
//! flows across days, and `preprocess` emits model-ready splits. Errors
//! go to stderr as `error category=<cat>: <message>` with a per-category
//! exit code.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use flowforge_core::flowmeter::FlowMeterConfig;
use flowforge_core::splitter::SplitOptions;
use flowforge_core::{Error, Result};
use flowforge_pipeline::{
    ingest_manifest, preprocess, run_days, sample_days, stage_raw, stats_table, stats_tree,
    DayReport, Layout, PipelineConfig, StageAction, StageRegistry,
};

/// Consulted for the data root when `--root` is not given.
const DATA_ROOT_ENV: &str = "FLOWFORGE_DATA_ROOT";

#[derive(Parser)]
#[command(name = "flowforge", version, about, max_term_width = 100)]
struct Cli {
    #[command(flatten)]
    globals: Globals,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// Data root directory [env: FLOWFORGE_DATA_ROOT]
    #[arg(long, global = true, value_name = "DIR")]
    root: Option<PathBuf>,

    /// Worker count for day-parallel runs (0 = one per core)
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    jobs: usize,

    /// Base seed for sampling and splitting
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Flow expiry timeout in seconds
    #[arg(long, global = true, default_value_t = 120.0, value_name = "SECS")]
    flow_timeout: f64,

    /// Active/idle segmentation timeout in seconds
    #[arg(long, global = true, default_value_t = 5.0, value_name = "SECS")]
    activity_timeout: f64,

    /// Also match anomaly filters with source/destination swapped
    #[arg(long, global = true)]
    symmetric_filters: bool,

    /// Drop notice-labeled anomalies instead of splitting them out
    #[arg(long, global = true)]
    exclude_notice: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a manifest and copy its files into the raw tree
    Ingest {
        /// CSV manifest: date, capture path, ';'-separated annotations
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
    },
    /// Execute per-day stages, skipping anything already up to date
    Run {
        #[command(flatten)]
        days: DaySelection,

        /// Comma-separated stage subset (default: all, in order)
        #[arg(long, value_delimiter = ',', value_name = "NAMES")]
        stages: Option<Vec<String>>,
    },
    /// Print row counts, label ratios, and per-day coverage
    Stats {
        /// Summarize one parquet file instead of the daily tree
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,

        /// Also write the per-day series as CSV plot data
        #[arg(long, value_name = "FILE")]
        plot_data: Option<PathBuf>,
    },
    /// Draw a uniform sample of flows across daily tables
    Sample {
        #[command(flatten)]
        days: DaySelection,

        /// Number of flows to draw
        #[arg(long, default_value_t = 3_000_000, value_name = "N")]
        rows: usize,
    },
    /// Turn a sampled table into scaled, one-hot, binarized splits
    Preprocess {
        /// Input parquet (default: <root>/dataset/sample.parquet)
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,

        /// Carve a validation part out of the training rows
        #[arg(long)]
        with_validation: bool,
    },
}

#[derive(Args)]
struct DaySelection {
    /// Operate on a single day
    #[arg(long, value_name = "YYYY-MM-DD", value_parser = parse_date,
          conflicts_with = "range")]
    date: Option<NaiveDate>,

    /// Operate on an inclusive day range
    #[arg(long, value_name = "FROM:TO", value_parser = parse_range)]
    range: Option<(NaiveDate, NaiveDate)>,
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date {s:?}: {e}"))
}

fn parse_range(s: &str) -> std::result::Result<(NaiveDate, NaiveDate), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("bad range {s:?}: expected FROM:TO"))?;
    let (from, to) = (parse_date(a)?, parse_date(b)?);
    if from > to {
        return Err(format!("bad range {s:?}: {from} is after {to}"));
    }
    Ok((from, to))
}

/// Pick the days to operate on: an explicit day as given, otherwise the
/// discovered tree filtered to the range.
fn resolve_days(
    sel: &DaySelection,
    discovered: Vec<NaiveDate>,
    hint: &str,
) -> Result<Vec<NaiveDate>> {
    if let Some(d) = sel.date {
        return Ok(vec![d]);
    }
    let days: Vec<NaiveDate> = match sel.range {
        Some((from, to)) => discovered.into_iter().filter(|d| (from..=to).contains(d)).collect(),
        None => discovered,
    };
    if days.is_empty() {
        return Err(Error::Validation(format!("no days selected; {hint}")));
    }
    Ok(days)
}

fn resolve_root(globals: &Globals) -> Result<Layout> {
    if let Some(root) = &globals.root {
        return Ok(Layout::new(root));
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(v) if !v.is_empty() => Ok(Layout::new(PathBuf::from(v))),
        _ => Err(Error::Validation(format!(
            "no data root; pass --root or set {DATA_ROOT_ENV}"
        ))),
    }
}

fn seconds_to_us(flag: &str, secs: f64) -> Result<i64> {
    if !secs.is_finite() || secs <= 0.0 {
        return Err(Error::Validation(format!(
            "{flag} must be a positive number of seconds, got {secs}"
        )));
    }
    Ok((secs * 1e6).round() as i64)
}

fn pipeline_config(globals: &Globals) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        seed: globals.seed,
        flowmeter: FlowMeterConfig {
            flow_timeout_us: seconds_to_us("--flow-timeout", globals.flow_timeout)?,
            activity_timeout_us: seconds_to_us("--activity-timeout", globals.activity_timeout)?,
            ..FlowMeterConfig::default()
        },
        split: SplitOptions {
            symmetric_filters: globals.symmetric_filters,
            exclude_notice: globals.exclude_notice,
        },
    })
}

fn action_str(action: StageAction) -> &'static str {
    match action {
        StageAction::Ran => "ran",
        StageAction::Skipped => "cached",
    }
}

fn print_day_reports(reports: &[DayReport]) {
    for report in reports {
        let stages: Vec<String> = report
            .stages
            .iter()
            .map(|s| format!("{} {}", s.stage, action_str(s.action)))
            .collect();
        println!("{}  {}", report.date, stages.join(", "));
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let globals = &cli.globals;
    match &cli.command {
        Command::Ingest { manifest } => {
            let layout = resolve_root(globals)?;
            let parsed = ingest_manifest(manifest)?;
            let report = stage_raw(&layout, &parsed)?;
            println!(
                "ingested {} days ({} files) under {}",
                report.days,
                report.files_copied,
                layout.root().display()
            );
        }
        Command::Run { days, stages } => {
            let layout = resolve_root(globals)?;
            let cfg = pipeline_config(globals)?;
            let dates =
                resolve_days(days, layout.discover_raw_days()?, "ingest raw captures first")?;
            let registry = StageRegistry::standard();
            let reports =
                run_days(&layout, &cfg, &registry, stages.as_deref(), &dates, globals.jobs)?;
            print_day_reports(&reports);
        }
        Command::Stats { input, plot_data } => {
            let report = match input {
                Some(path) => stats_table(path)?,
                None => stats_tree(&resolve_root(globals)?)?,
            };
            print!("{}", report.render_text());
            if let Some(path) = plot_data {
                report.write_plot_csv(path)?;
                println!("plot data written to {}", path.display());
            }
        }
        Command::Sample { days, rows } => {
            let layout = resolve_root(globals)?;
            let dates =
                resolve_days(days, layout.discover_daily_days()?, "run the pipeline first")?;
            let outcome = sample_days(&layout, &dates, *rows, globals.seed)?;
            println!(
                "sample over {} days ({}): {}",
                dates.len(),
                action_str(outcome.action),
                outcome.outputs[0].display()
            );
        }
        Command::Preprocess { input, with_validation } => {
            let layout = resolve_root(globals)?;
            let (outcome, report) =
                preprocess(&layout, input.as_deref(), globals.seed, *with_validation)?;
            if report.unseen_protocol_rows > 0 {
                eprintln!(
                    "warning: {} rows carry protocols unseen in training; \
                     their one-hot indicators are all zero",
                    report.unseen_protocol_rows
                );
            }
            println!(
                "preprocess ({}): {} rows in, {} dropped; train {} / validation {} / test {}",
                action_str(outcome.action),
                report.input_rows,
                report.dropped_rows,
                report.train_rows,
                report.validation_rows,
                report.test_rows
            );
            println!("outputs under {}", layout.dataset_dir().display());
        }
    }
    Ok(())
}

/// Stable per-category exit codes, distinct from clap's usage error (2).
fn exit_code(err: &Error) -> u8 {
    match err.category() {
        "io" => 10,
        "parse" => 11,
        "validation" => 12,
        "consistency" => 13,
        "schema" => 14,
        "domain" => 15,
        "contract" => 16,
        "truncated" => 17,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error category={}: {err}", err.category());
            ExitCode::from(exit_code(&err))
        }
    }
}
