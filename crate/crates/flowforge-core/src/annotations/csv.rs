//! CSV annotation parsing.
//!
//! Canonical header:
//!
//! ```text
//! anomaly_id,label,taxonomy,heuristic,distance,nb_detectors,src_ip,src_port,dst_ip,dst_port,protocol
//! ```
//!
//! One row per filter; rows sharing `anomaly_id` contribute extra filters
//! to the same anomaly and must repeat its metadata consistently. Empty
//! cells are absent filter fields. Real-world exports with different
//! column names are adapted via [`CsvColumnMap`].

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Deserialize;

use crate::table::csv_err;
use crate::{Error, Result};

use super::{AnomalyFilter, AnomalyRecord, Label, DEFAULT_HEURISTIC, DEFAULT_TAXONOMY};

/// Maps the canonical column roles onto the actual header names of a CSV
/// export. The default maps every role to its canonical name.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvColumnMap {
    pub anomaly_id: String,
    pub label: String,
    pub taxonomy: String,
    pub heuristic: String,
    pub distance: String,
    pub nb_detectors: String,
    pub src_ip: String,
    pub src_port: String,
    pub dst_ip: String,
    pub dst_port: String,
    pub protocol: String,
}

impl Default for CsvColumnMap {
    fn default() -> Self {
        CsvColumnMap {
            anomaly_id: "anomaly_id".into(),
            label: "label".into(),
            taxonomy: "taxonomy".into(),
            heuristic: "heuristic".into(),
            distance: "distance".into(),
            nb_detectors: "nb_detectors".into(),
            src_ip: "src_ip".into(),
            src_port: "src_port".into(),
            dst_ip: "dst_ip".into(),
            dst_port: "dst_port".into(),
            protocol: "protocol".into(),
        }
    }
}

impl CsvColumnMap {
    /// Load a mapping from a TOML file; roles not mentioned keep their
    /// canonical names.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| {
            Error::Parse(format!(
                "{}: column map: {e}",
                path.as_ref().display()
            ))
        })
    }
}

/// Parse with the canonical column names.
pub fn parse_csv_annotations(path: impl AsRef<Path>) -> Result<Vec<AnomalyRecord>> {
    parse_csv_annotations_with_map(path, &CsvColumnMap::default())
}

/// Parse with an explicit column mapping.
pub fn parse_csv_annotations_with_map(
    path: impl AsRef<Path>,
    map: &CsvColumnMap,
) -> Result<Vec<AnomalyRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse(format!(
            "{}: missing CSV header row",
            path.display()
        )));
    }
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse(format!("{}: missing column {name:?}", path.display()))
        })
    };
    let idx_id = col(&map.anomaly_id)?;
    let idx_label = col(&map.label)?;
    let idx_taxonomy = col(&map.taxonomy)?;
    let idx_heuristic = col(&map.heuristic)?;
    let idx_distance = col(&map.distance)?;
    let idx_detectors = col(&map.nb_detectors)?;
    let idx_src_ip = col(&map.src_ip)?;
    let idx_src_port = col(&map.src_port)?;
    let idx_dst_ip = col(&map.dst_ip)?;
    let idx_dst_port = col(&map.dst_port)?;
    let idx_protocol = col(&map.protocol)?;

    let mut order: Vec<String> = vec![];
    let mut by_id: HashMap<String, AnomalyRecord> = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2; // 1-based, after the header
        let ctx = |what: &str, err: String| {
            Error::Parse(format!("{}:{line}: {what}: {err}", path.display()))
        };
        let cell = |idx: usize| row.get(idx).unwrap_or("");

        let anomaly_id = cell(idx_id).to_string();
        if anomaly_id.is_empty() {
            return Err(ctx("anomaly_id", "empty".into()));
        }
        let label = Label::parse(cell(idx_label))
            .map_err(|e| ctx("label", e.to_string()))?;
        let taxonomy = match cell(idx_taxonomy) {
            "" => DEFAULT_TAXONOMY.to_string(),
            t => t.to_string(),
        };
        let heuristic = match cell(idx_heuristic) {
            "" => DEFAULT_HEURISTIC,
            t => t.parse().map_err(|e: std::num::ParseIntError| {
                ctx("heuristic", e.to_string())
            })?,
        };
        let distance: f64 = match cell(idx_distance) {
            "" => 0.0,
            t => t.parse().map_err(|e: std::num::ParseFloatError| {
                ctx("distance", e.to_string())
            })?,
        };
        let nb_detectors: u32 = match cell(idx_detectors) {
            "" => 0,
            t => t.parse().map_err(|e: std::num::ParseIntError| {
                ctx("nb_detectors", e.to_string())
            })?,
        };

        let filter = AnomalyFilter {
            src_ip: parse_opt(cell(idx_src_ip)).map_err(|e| ctx("src_ip", e))?,
            dst_ip: parse_opt(cell(idx_dst_ip)).map_err(|e| ctx("dst_ip", e))?,
            src_port: parse_opt(cell(idx_src_port)).map_err(|e| ctx("src_port", e))?,
            dst_port: parse_opt(cell(idx_dst_port)).map_err(|e| ctx("dst_port", e))?,
            protocol: parse_opt(cell(idx_protocol)).map_err(|e| ctx("protocol", e))?,
            window: None,
        };
        filter
            .validate()
            .map_err(|e| Error::Validation(format!("{}:{line}: {e}", path.display())))?;

        match by_id.get_mut(&anomaly_id) {
            None => {
                order.push(anomaly_id.clone());
                by_id.insert(
                    anomaly_id.clone(),
                    AnomalyRecord {
                        anomaly_id,
                        label,
                        taxonomy,
                        heuristic,
                        distance,
                        nb_detectors,
                        filters: vec![filter],
                    },
                );
            }
            Some(existing) => {
                let consistent = existing.label == label
                    && existing.taxonomy == taxonomy
                    && existing.heuristic == heuristic
                    && existing.distance == distance
                    && existing.nb_detectors == nb_detectors;
                if !consistent {
                    return Err(Error::Consistency(format!(
                        "{}:{line}: anomaly {:?} repeats with different metadata",
                        path.display(),
                        existing.anomaly_id
                    )));
                }
                existing.filters.push(filter);
            }
        }
    }

    Ok(order
        .into_iter()
        .map(|id| by_id.remove(&id).expect("id recorded at insert"))
        .collect())
}

fn parse_opt<T: std::str::FromStr>(cell: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|e: T::Err| e.to_string())
}
