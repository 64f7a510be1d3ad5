//! Hive-partitioned layout of the on-disk data root.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use flowforge_core::{Error, Result};

/// Root of the data tree. Every artifact lives in a hive-partitioned
/// directory beneath it:
///
/// ```text
/// <root>/raw/year=2011/month=01/day=12/capture.pcap[.gz]
///                                      annotations/<source files>
/// <root>/interim/year=.../day=../      per-stage intermediates + .ledger.json
/// <root>/daily/year=.../day=../        one labeled flow table per day
/// <root>/dataset/                      period-level artifacts
/// ```
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

fn hive(date: NaiveDate) -> PathBuf {
    PathBuf::from(format!(
        "year={:04}/month={:02}/day={:02}",
        date.year(),
        date.month(),
        date.day()
    ))
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn raw_day(&self, date: NaiveDate) -> PathBuf {
        self.root.join("raw").join(hive(date))
    }

    pub fn interim_day(&self, date: NaiveDate) -> PathBuf {
        self.root.join("interim").join(hive(date))
    }

    pub fn daily_day(&self, date: NaiveDate) -> PathBuf {
        self.root.join("daily").join(hive(date))
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    /// The day's raw capture: `capture.pcap` or `capture.pcap.gz`,
    /// exactly one of which must exist.
    pub fn capture_file(&self, date: NaiveDate) -> Result<PathBuf> {
        let dir = self.raw_day(date);
        let plain = dir.join("capture.pcap");
        let gz = dir.join("capture.pcap.gz");
        match (plain.exists(), gz.exists()) {
            (true, false) => Ok(plain),
            (false, true) => Ok(gz),
            (true, true) => Err(Error::Validation(format!(
                "both capture.pcap and capture.pcap.gz exist for {date}"
            ))),
            (false, false) => Err(Error::Validation(format!(
                "no capture for {date}; run ingest first"
            ))),
        }
    }

    /// The day's raw annotation files, sorted by file name.
    pub fn annotation_files(&self, date: NaiveDate) -> Result<Vec<PathBuf>> {
        let dir = self.raw_day(date).join("annotations");
        let mut files = vec![];
        if dir.is_dir() {
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.is_file() {
                    files.push(path);
                }
            }
        }
        if files.is_empty() {
            return Err(Error::Validation(format!(
                "no annotation files for {date}; run ingest first"
            )));
        }
        files.sort();
        Ok(files)
    }

    /// Dates present under `<root>/raw`, ascending.
    pub fn discover_raw_days(&self) -> Result<Vec<NaiveDate>> {
        discover(&self.root.join("raw"))
    }

    /// Dates present under `<root>/daily`, ascending.
    pub fn discover_daily_days(&self) -> Result<Vec<NaiveDate>> {
        discover(&self.root.join("daily"))
    }
}

fn numbered(dir: &Path, prefix: &str) -> Result<Vec<(u32, PathBuf)>> {
    let mut out = vec![];
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(n) = name.strip_prefix(prefix).and_then(|v| v.parse().ok()) {
            if path.is_dir() {
                out.push((n, path));
            }
        }
    }
    Ok(out)
}

fn discover(base: &Path) -> Result<Vec<NaiveDate>> {
    let mut dates = vec![];
    for (year, ydir) in numbered(base, "year=")? {
        for (month, mdir) in numbered(&ydir, "month=")? {
            for (day, _) in numbered(&mdir, "day=")? {
                if let Some(d) = NaiveDate::from_ymd_opt(year as i32, month, day) {
                    dates.push(d);
                }
            }
        }
    }
    dates.sort();
    Ok(dates)
}
