//! Period-level stages: sampling across days and dataset preprocessing.
//! Both cache through the dataset directory's ledger, exactly like the
//! per-day stages cache through their day ledgers.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flowforge_core::dataset::{
    apply_protocol_encoder, apply_scaler, apply_split, binarize_label, drop_missing,
    fit_protocol_encoder, fit_scaler, sample_period, split_dataset, write_scaler,
    write_split_manifest,
};
use flowforge_core::table::read_parquet;
use flowforge_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::ledger::{
    atomic_write_bytes, atomic_write_parquet, hash_inputs, outputs_fresh, record_outputs, Ledger,
    LedgerEntry, LEDGER_FILE,
};
use crate::layout::Layout;
use crate::stages::{StageAction, DAILY_FLOWS};

pub const SAMPLE_PARQUET: &str = "sample.parquet";
pub const TRAIN_PARQUET: &str = "train.parquet";
pub const VALIDATION_PARQUET: &str = "validation.parquet";
pub const TEST_PARQUET: &str = "test.parquet";
pub const SCALER_FILE: &str = "scaler.txt";
pub const SPLIT_MANIFEST_FILE: &str = "split-manifest.txt";
pub const PREPROCESS_REPORT: &str = "preprocess.json";

pub struct PeriodOutcome {
    pub action: StageAction,
    pub outputs: Vec<PathBuf>,
}

struct PeriodStage<'a> {
    layout: &'a Layout,
    name: &'static str,
    params: Vec<(String, String)>,
    inputs: Vec<PathBuf>,
}

impl PeriodStage<'_> {
    fn ledger_path(&self) -> PathBuf {
        self.layout.dataset_dir().join(LEDGER_FILE)
    }

    /// Returns the cached outputs when fresh, or `None` when the stage
    /// must run.
    fn cached(&self) -> Result<Option<Vec<PathBuf>>> {
        for p in &self.inputs {
            if !p.exists() {
                return Err(Error::Validation(format!(
                    "{}: missing input {}; run the pipeline first",
                    self.name,
                    p.display()
                )));
            }
        }
        let ledger = Ledger::load(&self.ledger_path())?;
        let Some(entry) = ledger.stages.get(self.name) else { return Ok(None) };
        let digest =
            hash_inputs(self.name, &self.params, &self.inputs, self.layout.root())?;
        if entry.input_hash == digest && outputs_fresh(entry, self.layout.root()) {
            let outputs =
                entry.outputs.iter().map(|o| self.layout.root().join(&o.path)).collect();
            return Ok(Some(outputs));
        }
        Ok(None)
    }

    fn commit(&self, outputs: &[PathBuf]) -> Result<()> {
        let path = self.ledger_path();
        let mut ledger = Ledger::load(&path)?;
        let digest =
            hash_inputs(self.name, &self.params, &self.inputs, self.layout.root())?;
        ledger.stages.insert(
            self.name.to_string(),
            LedgerEntry {
                input_hash: digest,
                outputs: record_outputs(outputs, self.layout.root())?,
            },
        );
        ledger.save(&path)
    }
}

/// Uniformly sample `target_rows` flows across the given days' aggregated
/// tables into `dataset/sample.parquet`.
pub fn sample_days(
    layout: &Layout,
    dates: &[NaiveDate],
    target_rows: usize,
    seed: u64,
) -> Result<PeriodOutcome> {
    if dates.is_empty() {
        return Err(Error::Validation("no days to sample; run the pipeline first".into()));
    }
    let inputs: Vec<PathBuf> =
        dates.iter().map(|&d| layout.daily_day(d).join(DAILY_FLOWS)).collect();
    let stage = PeriodStage {
        layout,
        name: "sample",
        params: vec![
            ("seed".into(), seed.to_string()),
            ("target_rows".into(), target_rows.to_string()),
            (
                "dates".into(),
                dates.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
            ),
        ],
        inputs,
    };
    if let Some(outputs) = stage.cached()? {
        return Ok(PeriodOutcome { action: StageAction::Skipped, outputs });
    }

    let mut tables = Vec::with_capacity(stage.inputs.len());
    for p in &stage.inputs {
        tables.push(read_parquet(p)?);
    }
    let sampled = sample_period(&tables, target_rows, seed)?;
    let out = layout.dataset_dir().join(SAMPLE_PARQUET);
    atomic_write_parquet(&sampled, &out)?;
    let outputs = vec![out];
    stage.commit(&outputs)?;
    Ok(PeriodOutcome { action: StageAction::Ran, outputs })
}

/// Counters from a preprocessing run, persisted next to its outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input_rows: u64,
    pub dropped_rows: u64,
    pub train_rows: u64,
    pub validation_rows: u64,
    pub test_rows: u64,
    /// Validation/test rows whose protocol the train-fitted encoder never
    /// saw; they one-hot to all zeros.
    pub unseen_protocol_rows: u64,
}

/// Turn a sampled flow table into model-ready train/validation/test
/// parquet files: drop rows with missing values, split by seeded shuffle,
/// fit the scaler and protocol encoder on the training rows only, then
/// one-hot protocols, min-max scale, and binarize labels in every part.
pub fn preprocess(
    layout: &Layout,
    input: Option<&Path>,
    seed: u64,
    with_validation: bool,
) -> Result<(PeriodOutcome, PreprocessReport)> {
    let dataset = layout.dataset_dir();
    let input = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dataset.join(SAMPLE_PARQUET));
    let stage = PeriodStage {
        layout,
        name: "preprocess",
        params: vec![
            ("seed".into(), seed.to_string()),
            ("with_validation".into(), with_validation.to_string()),
        ],
        inputs: vec![input.clone()],
    };
    if let Some(outputs) = stage.cached()? {
        let text = fs::read_to_string(dataset.join(PREPROCESS_REPORT))?;
        let report = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{PREPROCESS_REPORT}: {e}")))?;
        return Ok((PeriodOutcome { action: StageAction::Skipped, outputs }, report));
    }

    let table = read_parquet(&input)?;
    let (clean, dropped_rows) = drop_missing(&table);
    let manifest = split_dataset(clean.num_rows(), seed, with_validation);
    let (mut train, mut validation, mut test) = apply_split(&clean, &manifest)?;

    let encoder = fit_protocol_encoder(&train)?;
    let scaler = fit_scaler(&train, seed)?;

    let mut unseen = 0u64;
    for part in [&mut train, &mut validation, &mut test] {
        unseen += apply_protocol_encoder(part, &encoder)?;
        apply_scaler(part, &scaler)?;
        binarize_label(part)?;
    }

    let report = PreprocessReport {
        input_rows: table.num_rows() as u64,
        dropped_rows,
        train_rows: train.num_rows() as u64,
        validation_rows: validation.num_rows() as u64,
        test_rows: test.num_rows() as u64,
        unseen_protocol_rows: unseen,
    };

    fs::create_dir_all(&dataset)?;
    let mut outputs = vec![];
    let mut emit = |name: &str, table: &flowforge_core::table::Table| -> Result<()> {
        let path = dataset.join(name);
        atomic_write_parquet(table, &path)?;
        outputs.push(path);
        Ok(())
    };
    emit(TRAIN_PARQUET, &train)?;
    emit(TEST_PARQUET, &test)?;
    if with_validation {
        emit(VALIDATION_PARQUET, &validation)?;
    } else {
        let stale = dataset.join(VALIDATION_PARQUET);
        if stale.exists() {
            fs::remove_file(&stale)?;
        }
    }

    let scaler_path = dataset.join(SCALER_FILE);
    let tmp = dataset.join(format!(".tmp.{SCALER_FILE}"));
    write_scaler(&tmp, &scaler)?;
    fs::rename(&tmp, &scaler_path)?;
    outputs.push(scaler_path);

    let manifest_path = dataset.join(SPLIT_MANIFEST_FILE);
    let tmp = dataset.join(format!(".tmp.{SPLIT_MANIFEST_FILE}"));
    write_split_manifest(&tmp, &manifest)?;
    fs::rename(&tmp, &manifest_path)?;
    outputs.push(manifest_path);
    let report_path = dataset.join(PREPROCESS_REPORT);
    atomic_write_bytes(
        &report_path,
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Contract(format!("serializing report: {e}")))?
            .as_bytes(),
    )?;
    outputs.push(report_path);

    stage.commit(&outputs)?;
    Ok((PeriodOutcome { action: StageAction::Ran, outputs }, report))
}
