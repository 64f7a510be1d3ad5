//! The per-day stage pipeline.
//!
//! Every stage implements [`Stage`] and is registered by name in a
//! [`StageRegistry`]; the runner selects stages at runtime (all of them,
//! or the subset named on the command line) and executes them in
//! canonical order with content-hash caching from the day's ledger.
//!
//! Staleness is planned up front against the current disk state: a stage
//! reruns when its input digest changed, an output is missing or hashes
//! differently, or any upstream stage in the same invocation is stale.
//! Stages write through temp files, so an interrupted run leaves no
//! partial final outputs.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flowforge_core::annotations::{merge_annotations, parse_admd, parse_csv_annotations};
use flowforge_core::annotations::{load_day_annotations, write_day_annotations, DayAnnotations};
use flowforge_core::capture::read_capture;
use flowforge_core::dataset::{aggregate_day, propagate_labels};
use flowforge_core::flowmeter::{assemble_flows, flow_records_to_table};
use flowforge_core::splitter::{split_capture, PartitionId, SplitReport};
use flowforge_core::table::read_parquet;
use flowforge_core::{Error, Result};
use rayon::prelude::*;

use crate::ledger::{
    atomic_write_bytes, atomic_write_parquet, hash_inputs, outputs_fresh, record_outputs, Ledger,
    LEDGER_FILE,
};
use crate::layout::Layout;
use crate::PipelineConfig;

pub const ANNOTATIONS_PARQUET: &str = "annotations.parquet";
pub const SPLIT_DIR: &str = "split";
pub const SPLIT_REPORT: &str = "split/report.json";
pub const PACKETS_PARQUET: &str = "split/packets.parquet";
pub const FLOWS_DIR: &str = "flows";
pub const LABELED_DIR: &str = "labeled";
pub const DAILY_FLOWS: &str = "flows.parquet";

pub struct StageContext<'a> {
    pub date: NaiveDate,
    pub layout: &'a Layout,
    pub cfg: &'a PipelineConfig,
}

impl StageContext<'_> {
    fn interim(&self, rel: &str) -> PathBuf {
        self.layout.interim_day(self.date).join(rel)
    }

    fn annotations(&self) -> Result<DayAnnotations> {
        load_day_annotations(self.interim(ANNOTATIONS_PARQUET), self.date)
    }

    fn split_report(&self) -> Result<SplitReport> {
        SplitReport::read_json(self.interim(SPLIT_REPORT))
    }
}

/// One pipeline stage. Implementations declare the files they read and
/// the parameters that shape their output, both of which feed the cache
/// digest, and return every output file they wrote.
pub trait Stage: Send + Sync {
    fn name(&self) -> &'static str;

    /// Parameters folded into the cache key.
    fn params(&self, _ctx: &StageContext) -> Vec<(String, String)> {
        vec![]
    }

    /// Input files; all must exist before the stage can run.
    fn inputs(&self, ctx: &StageContext) -> Result<Vec<PathBuf>>;

    /// Execute and return the outputs written (absolute paths).
    fn run(&self, ctx: &StageContext) -> Result<Vec<PathBuf>>;
}

/// Name-keyed, ordered collection of stages.
pub struct StageRegistry {
    stages: Vec<Box<dyn Stage>>,
}

impl StageRegistry {
    /// The standard per-day pipeline in execution order.
    pub fn standard() -> Self {
        StageRegistry {
            stages: vec![
                Box::new(MergeAnnotations),
                Box::new(Split),
                Box::new(Flows),
                Box::new(LabelFlows),
                Box::new(Aggregate),
            ],
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.stages.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn Stage> {
        self.stages.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    /// Resolve a user-selected subset (or everything), always in
    /// canonical pipeline order.
    pub fn select(&self, names: Option<&[String]>) -> Result<Vec<&dyn Stage>> {
        let Some(names) = names else {
            return Ok(self.stages.iter().map(|s| s.as_ref()).collect());
        };
        for n in names {
            if self.get(n).is_none() {
                return Err(Error::Validation(format!(
                    "unknown stage {n:?}; known stages: {}",
                    self.names().join(", ")
                )));
            }
        }
        Ok(self
            .stages
            .iter()
            .filter(|s| names.iter().any(|n| n == s.name()))
            .map(|s| s.as_ref())
            .collect())
    }
}

/// Remove files in `dir` matching `ext` whose stem is not in `keep`,
/// so reruns never leave stale partition artifacts behind.
fn remove_stale(dir: &Path, ext: &str, keep: &SplitReport) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let (Some(stem), Some(e)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if e == ext && !keep.partitions.contains_key(stem) {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn sorted_dir(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = vec![];
    if dir.is_dir() {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(ext) {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

struct MergeAnnotations;

impl Stage for MergeAnnotations {
    fn name(&self) -> &'static str {
        "merge-annotations"
    }

    fn inputs(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        ctx.layout.annotation_files(ctx.date)
    }

    fn run(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let mut csv = vec![];
        let mut admd = vec![];
        let mut sources = vec![];
        for file in ctx.layout.annotation_files(ctx.date)? {
            let name = file.file_name().unwrap_or_default().to_string_lossy().into_owned();
            match file.extension().and_then(|e| e.to_str()) {
                Some("csv") => csv.extend(parse_csv_annotations(&file)?),
                Some("xml") => admd.extend(parse_admd(&file)?.anomalies),
                _ => {
                    return Err(Error::Validation(format!(
                        "unsupported annotation file {}",
                        file.display()
                    )))
                }
            }
            sources.push(name);
        }
        let day = merge_annotations(ctx.date, csv, admd, sources)?;
        let out = ctx.interim(ANNOTATIONS_PARQUET);
        let tmp = ctx.interim(&format!(".tmp.{ANNOTATIONS_PARQUET}"));
        fs::create_dir_all(out.parent().expect("interim day dir"))?;
        write_day_annotations(&day, &tmp).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })?;
        fs::rename(&tmp, &out)?;
        Ok(vec![out])
    }
}

struct Split;

impl Stage for Split {
    fn name(&self) -> &'static str {
        "split"
    }

    fn params(&self, ctx: &StageContext) -> Vec<(String, String)> {
        vec![
            ("symmetric_filters".into(), ctx.cfg.split.symmetric_filters.to_string()),
            ("exclude_notice".into(), ctx.cfg.split.exclude_notice.to_string()),
        ]
    }

    fn inputs(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        Ok(vec![ctx.layout.capture_file(ctx.date)?, ctx.interim(ANNOTATIONS_PARQUET)])
    }

    fn run(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let day = ctx.annotations()?;
        let capture = ctx.layout.capture_file(ctx.date)?;
        let out_dir = ctx.interim(SPLIT_DIR);
        let outcome = split_capture(&capture, &day, &out_dir, &ctx.cfg.split)?;
        remove_stale(&out_dir, "pcap", &outcome.report)?;

        let report_path = ctx.interim(SPLIT_REPORT);
        atomic_write_bytes(
            &report_path,
            serde_json::to_string_pretty(&outcome.report)
                .map_err(|e| Error::Contract(format!("serializing split report: {e}")))?
                .as_bytes(),
        )?;
        let packets_path = ctx.interim(PACKETS_PARQUET);
        atomic_write_parquet(&outcome.metadata, &packets_path)?;

        let mut outputs: Vec<PathBuf> = outcome.files.into_values().collect();
        outputs.push(report_path);
        outputs.push(packets_path);
        Ok(outputs)
    }
}

struct Flows;

impl Stage for Flows {
    fn name(&self) -> &'static str {
        "flows"
    }

    fn params(&self, ctx: &StageContext) -> Vec<(String, String)> {
        let f = &ctx.cfg.flowmeter;
        vec![
            ("flow_timeout_us".into(), f.flow_timeout_us.to_string()),
            ("activity_timeout_us".into(), f.activity_timeout_us.to_string()),
            ("reorder_slack_us".into(), f.reorder_slack_us.to_string()),
        ]
    }

    fn inputs(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let mut inputs = vec![ctx.interim(SPLIT_REPORT)];
        inputs.extend(sorted_dir(&ctx.interim(SPLIT_DIR), "pcap")?);
        Ok(inputs)
    }

    fn run(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let report = ctx.split_report()?;
        let out_dir = ctx.interim(FLOWS_DIR);
        let mut outputs = vec![];
        for stem in report.partitions.keys() {
            let pcap = ctx.interim(SPLIT_DIR).join(format!("{stem}.pcap"));
            if !pcap.exists() {
                return Err(Error::Consistency(format!(
                    "split output {} is missing; rerun the split stage",
                    pcap.display()
                )));
            }
            let packets = read_capture(&pcap)?;
            let flows = assemble_flows(&packets, &ctx.cfg.flowmeter)?;
            let table = flow_records_to_table(&flows)?;
            let out = out_dir.join(format!("{stem}.parquet"));
            atomic_write_parquet(&table, &out)?;
            outputs.push(out);
        }
        remove_stale(&out_dir, "parquet", &report)?;
        Ok(outputs)
    }
}

struct LabelFlows;

impl Stage for LabelFlows {
    fn name(&self) -> &'static str {
        "label"
    }

    fn inputs(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let mut inputs = vec![ctx.interim(SPLIT_REPORT), ctx.interim(ANNOTATIONS_PARQUET)];
        inputs.extend(sorted_dir(&ctx.interim(FLOWS_DIR), "parquet")?);
        Ok(inputs)
    }

    fn run(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let report = ctx.split_report()?;
        let day = ctx.annotations()?;
        let out_dir = ctx.interim(LABELED_DIR);
        let mut outputs = vec![];
        for stem in report.partitions.keys() {
            let src = ctx.interim(FLOWS_DIR).join(format!("{stem}.parquet"));
            if !src.exists() {
                return Err(Error::Consistency(format!(
                    "flow table {} is missing; rerun the flows stage",
                    src.display()
                )));
            }
            let mut table = read_parquet(&src)?;
            let partition = if stem == "benign" {
                PartitionId::Benign
            } else {
                PartitionId::Anomaly(stem.clone())
            };
            propagate_labels(&mut table, &partition, &day)?;
            let out = out_dir.join(format!("{stem}.parquet"));
            atomic_write_parquet(&table, &out)?;
            outputs.push(out);
        }
        remove_stale(&out_dir, "parquet", &report)?;
        Ok(outputs)
    }
}

struct Aggregate;

impl Stage for Aggregate {
    fn name(&self) -> &'static str {
        "aggregate"
    }

    fn inputs(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let mut inputs = vec![ctx.interim(SPLIT_REPORT)];
        inputs.extend(sorted_dir(&ctx.interim(LABELED_DIR), "parquet")?);
        Ok(inputs)
    }

    fn run(&self, ctx: &StageContext) -> Result<Vec<PathBuf>> {
        let report = ctx.split_report()?;
        let mut parts = vec![];
        for stem in report.partitions.keys() {
            let src = ctx.interim(LABELED_DIR).join(format!("{stem}.parquet"));
            if !src.exists() {
                return Err(Error::Consistency(format!(
                    "labeled table {} is missing; rerun the label stage",
                    src.display()
                )));
            }
            parts.push((stem.clone(), read_parquet(&src)?));
        }
        let table = aggregate_day(&parts)?;
        let out = ctx.layout.daily_day(ctx.date).join(DAILY_FLOWS);
        atomic_write_parquet(&table, &out)?;
        Ok(vec![out])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageAction {
    Ran,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: &'static str,
    pub action: StageAction,
}

#[derive(Clone, Debug)]
pub struct DayReport {
    pub date: NaiveDate,
    pub stages: Vec<StageReport>,
}

/// Run one day's stages (all, or the named subset) with caching.
pub fn run_day(
    layout: &Layout,
    cfg: &PipelineConfig,
    registry: &StageRegistry,
    stage_names: Option<&[String]>,
    date: NaiveDate,
) -> Result<DayReport> {
    // fail on an incomplete raw day before any stage writes anything
    layout.capture_file(date)?;
    layout.annotation_files(date)?;

    let stages = registry.select(stage_names)?;
    let ctx = StageContext { date, layout, cfg };
    let interim = layout.interim_day(date);
    fs::create_dir_all(&interim)?;
    let ledger_path = interim.join(LEDGER_FILE);
    let mut ledger = Ledger::load(&ledger_path)?;

    // plan staleness against the current disk state, cascading downstream
    let mut stale = Vec::with_capacity(stages.len());
    let mut digests = Vec::with_capacity(stages.len());
    let mut upstream_stale = false;
    for stage in &stages {
        let inputs = stage.inputs(&ctx)?;
        let digest = if inputs.iter().all(|p| p.exists()) {
            Some(hash_inputs(stage.name(), &stage.params(&ctx), &inputs, layout.root())?)
        } else {
            None
        };
        let fresh = match (&digest, ledger.stages.get(stage.name())) {
            (Some(d), Some(entry)) => {
                *d == entry.input_hash && outputs_fresh(entry, layout.root())
            }
            _ => false,
        };
        let is_stale = upstream_stale || !fresh;
        upstream_stale = is_stale || upstream_stale;
        stale.push(is_stale);
        digests.push(digest);
    }

    let mut reports = vec![];
    for (i, stage) in stages.iter().enumerate() {
        if !stale[i] {
            reports.push(StageReport { stage: stage.name(), action: StageAction::Skipped });
            continue;
        }
        let inputs = stage.inputs(&ctx)?;
        for p in &inputs {
            if !p.exists() {
                return Err(Error::Validation(format!(
                    "stage {} for {date}: missing input {}; run upstream stages first",
                    stage.name(),
                    p.display()
                )));
            }
        }
        // inputs may have been (re)written by an upstream stage this run
        let digest = match &digests[i] {
            Some(d) if !reports.iter().any(|r| r.action == StageAction::Ran) => d.clone(),
            _ => hash_inputs(stage.name(), &stage.params(&ctx), &inputs, layout.root())?,
        };
        let outputs = stage.run(&ctx)?;
        ledger.stages.insert(
            stage.name().to_string(),
            crate::ledger::LedgerEntry {
                input_hash: digest,
                outputs: record_outputs(&outputs, layout.root())?,
            },
        );
        ledger.save(&ledger_path)?;
        reports.push(StageReport { stage: stage.name(), action: StageAction::Ran });
    }
    Ok(DayReport { date, stages: reports })
}

/// Run several days, day-parallel with `jobs` workers (0 = one per core).
/// Each day's stages run sequentially; each day owns its ledger.
pub fn run_days(
    layout: &Layout,
    cfg: &PipelineConfig,
    registry: &StageRegistry,
    stage_names: Option<&[String]>,
    dates: &[NaiveDate],
    jobs: usize,
) -> Result<Vec<DayReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Contract(format!("building worker pool: {e}")))?;
    let results: Vec<Result<DayReport>> = pool.install(|| {
        dates
            .par_iter()
            .map(|&date| run_day(layout, cfg, registry, stage_names, date))
            .collect()
    });
    // deterministic error choice: report the earliest failing day
    results.into_iter().collect()
}
