//! Columnar persistence of a merged day: one Parquet row per
//! (anomaly, filter) pair with the anomaly metadata repeated, window
//! bounds as nullable columns.

use std::net::IpAddr;
use std::path::Path;

use chrono::NaiveDate;

use crate::table::{write_parquet, Cell, DType, Table};
use crate::{Error, Result};

use super::{AnomalyFilter, AnomalyRecord, DayAnnotations, Label, TimeWindow};

const SCHEMA: &[(&str, DType)] = &[
    ("anomaly_id", DType::Utf8),
    ("label", DType::Utf8),
    ("taxonomy", DType::Utf8),
    ("heuristic", DType::Int64),
    ("distance", DType::Float64),
    ("nb_detectors", DType::Int64),
    ("src_ip", DType::Utf8),
    ("src_port", DType::Int64),
    ("dst_ip", DType::Utf8),
    ("dst_port", DType::Int64),
    ("protocol", DType::Int64),
    ("window_start_us", DType::Int64),
    ("window_stop_us", DType::Int64),
];

/// Convert a merged day to its unified flat table.
pub fn day_annotations_table(day: &DayAnnotations) -> Result<Table> {
    let mut t = Table::empty(SCHEMA);
    for a in &day.anomalies {
        a.validate()?;
        for f in &a.filters {
            t.push_row(vec![
                Cell::Str(a.anomaly_id.clone()),
                Cell::Str(a.label.as_str().to_string()),
                Cell::Str(a.taxonomy.clone()),
                Cell::I64(a.heuristic),
                Cell::F64(a.distance),
                Cell::I64(i64::from(a.nb_detectors)),
                opt_str(f.src_ip.map(|ip| ip.to_string())),
                opt_i64(f.src_port.map(i64::from)),
                opt_str(f.dst_ip.map(|ip| ip.to_string())),
                opt_i64(f.dst_port.map(i64::from)),
                opt_i64(f.protocol.map(i64::from)),
                opt_i64(f.window.map(|w| w.start_us)),
                opt_i64(f.window.map(|w| w.stop_us)),
            ])?;
        }
    }
    Ok(t)
}

/// Persist a merged day as one Parquet file.
pub fn write_day_annotations(day: &DayAnnotations, path: impl AsRef<Path>) -> Result<()> {
    write_parquet(&day_annotations_table(day)?, path)
}

/// Load a merged day back. The calendar date is not stored in the file
/// (it lives in the partitioned directory path), so the caller supplies
/// it; `source_files` records the file read.
pub fn load_day_annotations(path: impl AsRef<Path>, date: NaiveDate) -> Result<DayAnnotations> {
    let path = path.as_ref();
    let t = crate::table::read_parquet(path)?;
    for (name, dtype) in SCHEMA {
        let col = t.require(name)?;
        if col.dtype() != *dtype {
            return Err(Error::Schema(format!(
                "{}: column {name:?} is {:?}, expected {dtype:?}",
                path.display(),
                col.dtype()
            )));
        }
    }
    let mut anomalies: Vec<AnomalyRecord> = vec![];
    for row in 0..t.num_rows() {
        let get = |name: &str| t.require(name).map(|c| c.cell(row));
        let anomaly_id = req_str(get("anomaly_id")?, "anomaly_id", path)?;
        let filter = AnomalyFilter {
            src_ip: opt_parse::<IpAddr>(get("src_ip")?, "src_ip", path)?,
            dst_ip: opt_parse::<IpAddr>(get("dst_ip")?, "dst_ip", path)?,
            src_port: opt_port(get("src_port")?, "src_port", path)?,
            dst_port: opt_port(get("dst_port")?, "dst_port", path)?,
            protocol: match opt_int(get("protocol")?, "protocol", path)? {
                None => None,
                Some(v) => Some(u8::try_from(v).map_err(|_| bad(path, "protocol", v))?),
            },
            window: match (
                opt_int(get("window_start_us")?, "window_start_us", path)?,
                opt_int(get("window_stop_us")?, "window_stop_us", path)?,
            ) {
                (None, None) => None,
                (Some(a), Some(b)) => Some(TimeWindow::new(a, b)?),
                _ => {
                    return Err(Error::Validation(format!(
                        "{}: filter of {anomaly_id:?} has only one window bound",
                        path.display()
                    )))
                }
            },
        };
        match anomalies.last_mut().filter(|a| a.anomaly_id == anomaly_id) {
            Some(a) => a.filters.push(filter),
            None => {
                if anomalies.iter().any(|a| a.anomaly_id == anomaly_id) {
                    return Err(Error::Validation(format!(
                        "{}: rows of anomaly {anomaly_id:?} are not contiguous",
                        path.display()
                    )));
                }
                anomalies.push(AnomalyRecord {
                    label: Label::parse(&req_str(get("label")?, "label", path)?)?,
                    taxonomy: req_str(get("taxonomy")?, "taxonomy", path)?,
                    heuristic: req_int(get("heuristic")?, "heuristic", path)?,
                    distance: match get("distance")? {
                        Cell::F64(v) => v,
                        other => return Err(bad_cell(path, "distance", &other)),
                    },
                    nb_detectors: {
                        let v = req_int(get("nb_detectors")?, "nb_detectors", path)?;
                        u32::try_from(v).map_err(|_| bad(path, "nb_detectors", v))?
                    },
                    anomaly_id,
                    filters: vec![filter],
                });
            }
        }
    }
    let day = DayAnnotations {
        date,
        anomalies,
        source_files: vec![path.display().to_string()],
    };
    for a in &day.anomalies {
        a.validate()?;
    }
    Ok(day)
}

fn opt_str(v: Option<String>) -> Cell {
    v.map_or(Cell::Null, Cell::Str)
}

fn opt_i64(v: Option<i64>) -> Cell {
    v.map_or(Cell::Null, Cell::I64)
}

fn bad(path: &Path, col: &str, v: i64) -> Error {
    Error::Validation(format!("{}: {col} value {v} out of range", path.display()))
}

fn bad_cell(path: &Path, col: &str, cell: &Cell) -> Error {
    Error::Schema(format!(
        "{}: unexpected {cell:?} in column {col:?}",
        path.display()
    ))
}

fn req_str(cell: Cell, col: &str, path: &Path) -> Result<String> {
    match cell {
        Cell::Str(s) => Ok(s),
        other => Err(bad_cell(path, col, &other)),
    }
}

fn req_int(cell: Cell, col: &str, path: &Path) -> Result<i64> {
    match cell {
        Cell::I64(v) => Ok(v),
        other => Err(bad_cell(path, col, &other)),
    }
}

fn opt_int(cell: Cell, col: &str, path: &Path) -> Result<Option<i64>> {
    match cell {
        Cell::Null => Ok(None),
        Cell::I64(v) => Ok(Some(v)),
        other => Err(bad_cell(path, col, &other)),
    }
}

fn opt_port(cell: Cell, col: &str, path: &Path) -> Result<Option<u16>> {
    Ok(match opt_int(cell, col, path)? {
        None => None,
        Some(v) => Some(u16::try_from(v).map_err(|_| bad(path, col, v))?),
    })
}

fn opt_parse<T: std::str::FromStr>(cell: Cell, col: &str, path: &Path) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match cell {
        Cell::Null => Ok(None),
        Cell::Str(s) => s.parse().map(Some).map_err(|e: T::Err| {
            Error::Parse(format!("{}: {col}={s:?}: {e}", path.display()))
        }),
        other => Err(bad_cell(path, col, &other)),
    }
}
