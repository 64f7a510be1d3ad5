//! MAWILab-style per-day anomaly annotations: CSV filter listings, ADMD
//! XML (the only source carrying time windows), their merge into one
//! unified table, and the columnar persistence of that table.
//!
//! The exact upstream file schemas are not standardized, so parsing is
//! built around a documented canonical schema (the one the fixtures use)
//! plus a column-mapping configuration for adapting real CSV exports; see
//! [`CsvColumnMap`].

mod admd;
mod csv;
mod merge;
mod store;

pub use admd::{parse_admd, ParsedAdmd};
pub use csv::{parse_csv_annotations, parse_csv_annotations_with_map, CsvColumnMap};
pub use merge::merge_annotations;
pub use store::{load_day_annotations, write_day_annotations};

use std::fmt;
use std::net::IpAddr;

use chrono::NaiveDate;

use crate::{Error, Result};

/// The three annotation classes. Benign never appears here: traffic
/// matched by no anomaly is benign by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Anomalous,
    Suspicious,
    Notice,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Anomalous => "anomalous",
            Label::Suspicious => "suspicious",
            Label::Notice => "notice",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "anomalous" => Ok(Label::Anomalous),
            "suspicious" => Ok(Label::Suspicious),
            "notice" => Ok(Label::Notice),
            other => Err(Error::Parse(format!(
                "unknown anomaly label {other:?} (expected anomalous, suspicious or notice)"
            ))),
        }
    }

    /// Routing precedence: anomalous wins over suspicious wins over notice.
    pub fn precedence(self) -> u8 {
        match self {
            Label::Anomalous => 0,
            Label::Suspicious => 1,
            Label::Notice => 2,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive time window in µs since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimeWindow {
    pub start_us: i64,
    pub stop_us: i64,
}

impl TimeWindow {
    pub fn new(start_us: i64, stop_us: i64) -> Result<Self> {
        if start_us > stop_us {
            return Err(Error::Validation(format!(
                "time window start {start_us} is after stop {stop_us}"
            )));
        }
        Ok(TimeWindow { start_us, stop_us })
    }

    pub fn contains(&self, ts_us: i64) -> bool {
        (self.start_us..=self.stop_us).contains(&ts_us)
    }
}

/// A match predicate over packet 5-tuple fields plus an optional window.
/// Absent fields are wildcards; a filter with every field absent would
/// match all traffic and is rejected wherever filters are built.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AnomalyFilter {
    pub src_ip: Option<IpAddr>,
    pub dst_ip: Option<IpAddr>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub protocol: Option<u8>,
    pub window: Option<TimeWindow>,
}

impl AnomalyFilter {
    /// True when no field at all is present (including the window).
    pub fn is_unconstrained(&self) -> bool {
        self.src_ip.is_none()
            && self.dst_ip.is_none()
            && self.src_port.is_none()
            && self.dst_port.is_none()
            && self.protocol.is_none()
            && self.window.is_none()
    }

    /// The filter's 5-tuple expression, ignoring the window. Used to
    /// detect window-less duplicates during merging.
    pub fn expression(&self) -> AnomalyFilter {
        AnomalyFilter {
            window: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_unconstrained() {
            return Err(Error::Validation(
                "filter with no fields would match all traffic".into(),
            ));
        }
        Ok(())
    }
}

/// One annotated anomaly with its match filters.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyRecord {
    /// Unique within a day.
    pub anomaly_id: String,
    pub label: Label,
    /// Communication-pattern class, e.g. "ptmpHTTP"; "unknown" if absent.
    pub taxonomy: String,
    /// Rule-derived numeric tag; 999 encodes "unknown".
    pub heuristic: i64,
    /// The distance score d_c.
    pub distance: f64,
    pub nb_detectors: u32,
    /// Non-empty.
    pub filters: Vec<AnomalyFilter>,
}

pub const DEFAULT_TAXONOMY: &str = "unknown";
pub const DEFAULT_HEURISTIC: i64 = 999;

impl AnomalyRecord {
    pub fn validate(&self) -> Result<()> {
        if self.filters.is_empty() {
            return Err(Error::Validation(format!(
                "anomaly {:?} carries no filters",
                self.anomaly_id
            )));
        }
        for f in &self.filters {
            f.validate()?;
        }
        Ok(())
    }
}

/// All anomalies of one calendar day.
#[derive(Clone, Debug, PartialEq)]
pub struct DayAnnotations {
    pub date: NaiveDate,
    pub anomalies: Vec<AnomalyRecord>,
    /// Provenance: the files this table was merged from.
    pub source_files: Vec<String>,
}

impl DayAnnotations {
    pub fn anomaly(&self, id: &str) -> Option<&AnomalyRecord> {
        self.anomalies.iter().find(|a| a.anomaly_id == id)
    }

    /// The day as a CSV-style source would carry it: windows stripped,
    /// filters deduplicated, anomalies left with no expressible filter
    /// omitted. Together with [`Self::admd_view`] this supports the merge
    /// idempotence property.
    pub fn csv_view(&self) -> Vec<AnomalyRecord> {
        let mut out = vec![];
        for a in &self.anomalies {
            let mut filters: Vec<AnomalyFilter> = vec![];
            for f in &a.filters {
                let stripped = f.expression();
                if !stripped.is_unconstrained() && !filters.contains(&stripped) {
                    filters.push(stripped);
                }
            }
            if !filters.is_empty() {
                out.push(AnomalyRecord { filters, ..a.clone() });
            }
        }
        out
    }

    /// The day as an ADMD-style source would carry it: only windowed
    /// filters, anomalies without any omitted.
    pub fn admd_view(&self) -> Vec<AnomalyRecord> {
        let mut out = vec![];
        for a in &self.anomalies {
            let filters: Vec<AnomalyFilter> = a
                .filters
                .iter()
                .filter(|f| f.window.is_some())
                .cloned()
                .collect();
            if !filters.is_empty() {
                out.push(AnomalyRecord { filters, ..a.clone() });
            }
        }
        out
    }
}
