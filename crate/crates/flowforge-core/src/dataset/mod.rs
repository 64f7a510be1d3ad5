//! Dataset assembly: label propagation, day aggregation, period sampling,
//! preprocessing transforms, and train/validation/test split manifests.
//!
//! All operations are pure table transforms; everything randomized takes
//! an explicit seed, so (seed, inputs) fully determine every output byte.

mod sidecar;

pub use sidecar::{read_scaler, read_split_manifest, write_scaler, write_split_manifest};

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::DayAnnotations;
use crate::flowmeter::flow_table_schema;
use crate::splitter::PartitionId;
use crate::table::{Cell, Column, ColumnData, DType, Table};
use crate::{derive_seed, Error, Result};

pub const LABEL_BENIGN: &str = "benign";

/// Provenance columns appended by label propagation; null on benign rows.
/// These are deliberately outside the canonical feature schema and are
/// ignored by missing-value filtering and scaling.
pub const SIDE_COLUMNS: [&str; 3] = ["anomaly_id", "taxonomy", "heuristic"];

/// Identifier and label columns that are never min-max scaled.
pub const UNSCALED_COLUMNS: [&str; 8] = [
    "Flow ID",
    "Src IP",
    "Src Port",
    "Dst IP",
    "Dst Port",
    "Protocol",
    "Timestamp",
    "Label",
];

/// Schema of a labeled flow table: the canonical columns plus provenance.
pub fn labeled_flow_schema() -> Vec<(&'static str, DType)> {
    let mut s = flow_table_schema();
    s.push(("anomaly_id", DType::Utf8));
    s.push(("taxonomy", DType::Utf8));
    s.push(("heuristic", DType::Int64));
    s
}

/// Fill the Label column from the partition the flows came from and
/// append the provenance columns. Benign partitions label "benign" with
/// null provenance; anomaly partitions carry the anomaly's class plus its
/// id, taxonomy and heuristic.
pub fn propagate_labels(
    table: &mut Table,
    partition: &PartitionId,
    day: &DayAnnotations,
) -> Result<()> {
    let n = table.num_rows();
    let (label, id, taxonomy, heuristic) = match partition {
        PartitionId::Benign => (LABEL_BENIGN.to_string(), None, None, None),
        PartitionId::Anomaly(id) => {
            let a = day.anomaly(id).ok_or_else(|| {
                Error::Consistency(format!(
                    "partition {id:?} has no matching anomaly in the {} annotations",
                    day.date
                ))
            })?;
            (
                a.label.as_str().to_string(),
                Some(id.clone()),
                Some(a.taxonomy.clone()),
                Some(a.heuristic),
            )
        }
    };
    let col = table
        .column_mut("Label")
        .ok_or_else(|| Error::Schema("flow table lacks a Label column".into()))?;
    *col = ColumnData::Utf8(vec![Some(label); n]);

    let at = table.num_columns();
    table.insert_column(at, Column {
        name: "anomaly_id".into(),
        data: ColumnData::Utf8(vec![id; n]),
    })?;
    table.insert_column(at + 1, Column {
        name: "taxonomy".into(),
        data: ColumnData::Utf8(vec![taxonomy; n]),
    })?;
    table.insert_column(at + 2, Column {
        name: "heuristic".into(),
        data: ColumnData::Int64(vec![heuristic; n]),
    })?;
    Ok(())
}

fn sort_keys(table: &Table, partition_of_row: &[usize], parts: &[&str]) -> Vec<usize> {
    let ts: Vec<i64> = match table.column("Timestamp") {
        Some(ColumnData::Int64(v)) => v.iter().map(|x| x.unwrap_or(i64::MIN)).collect(),
        _ => vec![i64::MIN; table.num_rows()],
    };
    let fid: Vec<&str> = match table.column("Flow ID") {
        Some(ColumnData::Utf8(v)) => v.iter().map(|x| x.as_deref().unwrap_or("")).collect(),
        _ => vec![""; table.num_rows()],
    };
    let mut order: Vec<usize> = (0..table.num_rows()).collect();
    order.sort_by(|&a, &b| {
        (ts[a], fid[a], parts[partition_of_row[a]])
            .cmp(&(ts[b], fid[b], parts[partition_of_row[b]]))
    });
    order
}

/// Concatenate one day's labeled partition tables and sort stably by
/// Timestamp, ties broken by Flow ID and then source partition id.
pub fn aggregate_day(parts: &[(String, Table)]) -> Result<Table> {
    if parts.is_empty() {
        return Ok(Table::empty(&labeled_flow_schema()));
    }
    let want = parts[0].1.schema();
    for (name, t) in &parts[1..] {
        if t.schema() != want {
            return Err(Error::Schema(format!(
                "partition {name:?} table schema differs from {:?}",
                parts[0].0
            )));
        }
    }
    let tables: Vec<Table> = parts.iter().map(|(_, t)| t.clone()).collect();
    let big = Table::concat(&tables)?;
    let mut partition_of_row = Vec::with_capacity(big.num_rows());
    for (i, (_, t)) in parts.iter().enumerate() {
        partition_of_row.extend(std::iter::repeat_n(i, t.num_rows()));
    }
    let part_names: Vec<&str> = parts.iter().map(|(n, _)| n.as_str()).collect();
    let order = sort_keys(&big, &partition_of_row, &part_names);
    Ok(big.take(&order))
}

/// Seeded uniform sample without replacement across a period's day
/// tables, re-sorted by Timestamp after selection.
pub fn sample_period(days: &[Table], target_rows: usize, seed: u64) -> Result<Table> {
    if days.is_empty() {
        return Err(Error::Validation("no day tables to sample from".into()));
    }
    let want = days[0].schema();
    for (i, t) in days.iter().enumerate().skip(1) {
        if t.schema() != want {
            return Err(Error::Schema(format!("day table {i} schema differs from day table 0")));
        }
    }
    let big = Table::concat(days)?;
    let total = big.num_rows();
    if target_rows > total {
        return Err(Error::Validation(format!(
            "sample of {target_rows} rows requested but only {total} available"
        )));
    }
    // partial Fisher–Yates: the first target_rows slots end up a uniform
    // draw without replacement
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sample-period"));
    let mut indices: Vec<usize> = (0..total).collect();
    for i in 0..target_rows {
        let j = rng.random_range(i..total);
        indices.swap(i, j);
    }
    let mut chosen = indices[..target_rows].to_vec();
    chosen.sort_unstable(); // restore original relative order
    let picked = big.take(&chosen);
    let zeros = vec![0usize; picked.num_rows()];
    let order = sort_keys(&picked, &zeros, &[""]);
    Ok(picked.take(&order))
}

/// Min-max parameters per scaled feature, with the fingerprint of the
/// data they were fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    /// `content_hash` of the fit table.
    pub dataset_hash: String,
    pub seed: u64,
    pub features: Vec<ScalerFeature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerFeature {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// The feature columns scaling covers: every Float64 column except
/// identifiers, the label, provenance and protocol indicators.
pub fn scaled_feature_names(table: &Table) -> Vec<String> {
    table
        .columns()
        .iter()
        .filter(|c| {
            c.data.dtype() == DType::Float64
                && !UNSCALED_COLUMNS.contains(&c.name.as_str())
                && !SIDE_COLUMNS.contains(&c.name.as_str())
                && !c.name.starts_with("Protocol_")
        })
        .map(|c| c.name.clone())
        .collect()
}

fn f64_column<'t>(table: &'t Table, name: &str) -> Result<&'t Vec<Option<f64>>> {
    match table.require(name)? {
        ColumnData::Float64(v) => Ok(v),
        other => Err(Error::Schema(format!(
            "column {name:?} is {:?}, expected Float64",
            other.dtype()
        ))),
    }
}

/// Fit min-max parameters on training data. The table must be clean:
/// a null or non-finite value in a scaled column is an error (run
/// [`drop_missing`] first).
pub fn fit_scaler(train: &Table, seed: u64) -> Result<ScalerParams> {
    if train.num_rows() == 0 {
        return Err(Error::Validation("cannot fit a scaler on an empty table".into()));
    }
    let mut features = vec![];
    for name in scaled_feature_names(train) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in f64_column(train, &name)? {
            match v {
                Some(x) if x.is_finite() => {
                    min = min.min(*x);
                    max = max.max(*x);
                }
                Some(x) => {
                    return Err(Error::Validation(format!(
                        "feature {name:?} contains non-finite value {x}; fit data must be clean"
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "feature {name:?} contains missing values; fit data must be clean"
                    )))
                }
            }
        }
        features.push(ScalerFeature { name, min, max });
    }
    Ok(ScalerParams { dataset_hash: train.content_hash(), seed, features })
}

fn check_feature_cover(table: &Table, params: &ScalerParams) -> Result<()> {
    let have: BTreeSet<String> = scaled_feature_names(table).into_iter().collect();
    let know: BTreeSet<String> = params.features.iter().map(|f| f.name.clone()).collect();
    if have != know {
        let missing: Vec<&String> = have.difference(&know).collect();
        let extra: Vec<&String> = know.difference(&have).collect();
        return Err(Error::Schema(format!(
            "scaler does not cover the table: missing params for {missing:?}, \
             params without columns {extra:?}"
        )));
    }
    Ok(())
}

/// x' = (x − min) / (max − min); constant features map to 0. Values
/// outside the fit range scale outside [0,1] — deliberately unclipped.
pub fn apply_scaler(table: &mut Table, params: &ScalerParams) -> Result<()> {
    check_feature_cover(table, params)?;
    for f in &params.features {
        let span = f.max - f.min;
        let col = table.column_mut(&f.name).expect("cover checked");
        let ColumnData::Float64(v) = col else { unreachable!("cover checked dtype") };
        for x in v.iter_mut().flatten() {
            *x = if span == 0.0 { 0.0 } else { (*x - f.min) / span };
        }
    }
    Ok(())
}

/// Undo [`apply_scaler`]: x = x'·(max − min) + min. Constant features
/// recover their fitted value.
pub fn inverse_scaler(table: &mut Table, params: &ScalerParams) -> Result<()> {
    check_feature_cover(table, params)?;
    for f in &params.features {
        let span = f.max - f.min;
        let col = table.column_mut(&f.name).expect("cover checked");
        let ColumnData::Float64(v) = col else { unreachable!("cover checked dtype") };
        for x in v.iter_mut().flatten() {
            *x = if span == 0.0 { f.min } else { *x * span + f.min };
        }
    }
    Ok(())
}

/// Distinct protocol values seen at fit time, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolEncoder {
    pub protocols: Vec<i64>,
}

pub fn fit_protocol_encoder(train: &Table) -> Result<ProtocolEncoder> {
    let ColumnData::Int64(v) = train.require("Protocol")? else {
        return Err(Error::Schema("Protocol column is not Int64".into()));
    };
    let distinct: BTreeSet<i64> = v.iter().flatten().copied().collect();
    if distinct.is_empty() {
        return Err(Error::Validation(
            "cannot fit a protocol encoder without any protocol values".into(),
        ));
    }
    Ok(ProtocolEncoder { protocols: distinct.into_iter().collect() })
}

/// Replace the Protocol column with one indicator column per fitted
/// value, in place. Rows with a protocol the encoder never saw get all
/// zeros; their count is returned for warning surfaces.
pub fn apply_protocol_encoder(table: &mut Table, enc: &ProtocolEncoder) -> Result<u64> {
    let at = table
        .column_names()
        .iter()
        .position(|n| *n == "Protocol")
        .ok_or_else(|| Error::Schema("table lacks a Protocol column".into()))?;
    let dropped = table.drop_column("Protocol")?;
    let ColumnData::Int64(values) = dropped.data else {
        return Err(Error::Schema("Protocol column is not Int64".into()));
    };
    let mut unseen = 0u64;
    for v in &values {
        if !v.is_some_and(|v| enc.protocols.binary_search(&v).is_ok()) {
            unseen += 1;
        }
    }
    for (offset, proto) in enc.protocols.iter().enumerate() {
        let data: Vec<Option<i64>> = values
            .iter()
            .map(|v| Some(i64::from(*v == Some(*proto))))
            .collect();
        table.insert_column(at + offset, Column {
            name: format!("Protocol_{proto}"),
            data: ColumnData::Int64(data),
        })?;
    }
    Ok(unseen)
}

/// Binarize the Label column in place: "benign" maps to 0, every other
/// label to 1. The column keeps its name and position, as Int64.
pub fn binarize_label(table: &mut Table) -> Result<()> {
    let at = table
        .column_names()
        .iter()
        .position(|n| *n == "Label")
        .ok_or_else(|| Error::Schema("table lacks a Label column".into()))?;
    let dropped = table.drop_column("Label")?;
    let ColumnData::Utf8(values) = dropped.data else {
        return Err(Error::Schema("Label column is not Utf8".into()));
    };
    let data: Vec<Option<i64>> = values
        .iter()
        .map(|v| v.as_ref().map(|s| i64::from(s != LABEL_BENIGN)))
        .collect();
    table.insert_column(at, Column { name: "Label".into(), data: ColumnData::Int64(data) })?;
    Ok(())
}

/// Drop rows with a missing value: a null cell or a non-finite numeric in
/// any column except the provenance side columns. Returns the surviving
/// table and the dropped-row count.
pub fn drop_missing(table: &Table) -> (Table, u64) {
    let checked: Vec<&Column> = table
        .columns()
        .iter()
        .filter(|c| !SIDE_COLUMNS.contains(&c.name.as_str()))
        .collect();
    let mut keep = vec![];
    'rows: for r in 0..table.num_rows() {
        for c in &checked {
            match c.data.cell(r) {
                Cell::Null => continue 'rows,
                Cell::F64(x) if !x.is_finite() => continue 'rows,
                _ => {}
            }
        }
        keep.push(r);
    }
    let dropped = (table.num_rows() - keep.len()) as u64;
    (table.take(&keep), dropped)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitClass {
    Train,
    Validation,
    Test,
}

impl SplitClass {
    pub fn code(self) -> char {
        match self {
            SplitClass::Train => 't',
            SplitClass::Validation => 'v',
            SplitClass::Test => 's',
        }
    }

    pub fn from_code(c: char) -> Result<Self> {
        match c {
            't' => Ok(SplitClass::Train),
            'v' => Ok(SplitClass::Validation),
            's' => Ok(SplitClass::Test),
            other => Err(Error::Parse(format!("unknown split class code {other:?}"))),
        }
    }
}

/// Row-level train/validation/test assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub with_validation: bool,
    /// One entry per row of the split table.
    pub assignments: Vec<SplitClass>,
}

impl SplitManifest {
    /// (train, validation, test) sizes.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for a in &self.assignments {
            match a {
                SplitClass::Train => c.0 += 1,
                SplitClass::Validation => c.1 += 1,
                SplitClass::Test => c.2 += 1,
            }
        }
        c
    }

    pub fn indices(&self, class: SplitClass) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == class)
            .collect()
    }
}

/// Assign `rows` row indices to train/test 80/20 (and, with validation,
/// re-split train 80/20 for a net 64/16/20), by seeded shuffle. Realized
/// sizes stay within ±1 row of the exact targets.
pub fn split_dataset(rows: usize, seed: u64, with_validation: bool) -> SplitManifest {
    let test = (rows as f64 * 0.2).round() as usize;
    let rest = rows - test;
    let validation = if with_validation { (rest as f64 * 0.2).round() as usize } else { 0 };

    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "dataset-split"));
    order.shuffle(&mut rng);

    let mut assignments = vec![SplitClass::Train; rows];
    for &i in &order[..test] {
        assignments[i] = SplitClass::Test;
    }
    for &i in &order[test..test + validation] {
        assignments[i] = SplitClass::Validation;
    }
    SplitManifest { seed, with_validation, assignments }
}

/// Materialize the split: (train, validation, test) tables.
pub fn apply_split(table: &Table, manifest: &SplitManifest) -> Result<(Table, Table, Table)> {
    if manifest.assignments.len() != table.num_rows() {
        return Err(Error::Validation(format!(
            "split manifest covers {} rows but the table has {}",
            manifest.assignments.len(),
            table.num_rows()
        )));
    }
    Ok((
        table.take(&manifest.indices(SplitClass::Train)),
        table.take(&manifest.indices(SplitClass::Validation)),
        table.take(&manifest.indices(SplitClass::Test)),
    ))
}
