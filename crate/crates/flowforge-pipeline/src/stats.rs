//! Summary statistics over produced datasets: row counts, label ratios,
//! and a per-day coverage series suitable for plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use flowforge_core::table::{read_parquet, Cell, Table};
use flowforge_core::{Error, Result};

use crate::layout::Layout;
use crate::stages::{ANNOTATIONS_PARQUET, DAILY_FLOWS};

/// Count rows per label value. Works on both string labels and the
/// binarized 0/1 form (counted under "0"/"1").
pub fn table_label_counts(table: &Table) -> Result<BTreeMap<String, u64>> {
    let col = table
        .column("Label")
        .ok_or_else(|| Error::Schema("table lacks a Label column".into()))?;
    let mut counts = BTreeMap::new();
    for r in 0..table.num_rows() {
        let key = match col.cell(r) {
            Cell::Str(s) => s,
            Cell::I64(v) => v.to_string(),
            Cell::Null => "<missing>".to_string(),
            Cell::F64(v) => v.to_string(),
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DayStats {
    pub date: NaiveDate,
    pub rows: u64,
    /// Number of annotation filters active that day.
    pub filters: u64,
    pub labels: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StatsReport {
    pub days: Vec<DayStats>,
    pub total_rows: u64,
    pub labels: BTreeMap<String, u64>,
}

impl StatsReport {
    pub fn from_days(days: Vec<DayStats>) -> Self {
        let mut report = StatsReport { days, ..Default::default() };
        for day in &report.days {
            report.total_rows += day.rows;
            for (label, n) in &day.labels {
                *report.labels.entry(label.clone()).or_insert(0) += n;
            }
        }
        report
    }

    pub fn single_table(table: &Table) -> Result<Self> {
        Ok(StatsReport {
            days: vec![],
            total_rows: table.num_rows() as u64,
            labels: table_label_counts(table)?,
        })
    }

    /// Fraction of all rows carrying `label`; 0 on an empty dataset.
    pub fn ratio(&self, label: &str) -> f64 {
        if self.total_rows == 0 {
            return 0.0;
        }
        *self.labels.get(label).unwrap_or(&0) as f64 / self.total_rows as f64
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows: {}", self.total_rows);
        let _ = writeln!(out, "labels:");
        for (label, n) in &self.labels {
            let _ = writeln!(out, "  {label}: {n} (ratio {:.4})", self.ratio(label));
        }
        if !self.days.is_empty() {
            let _ = writeln!(out, "days: {}", self.days.len());
            for day in &self.days {
                let mut parts = vec![format!("rows={}", day.rows), format!("filters={}", day.filters)];
                parts.extend(day.labels.iter().map(|(l, n)| format!("{l}={n}")));
                let _ = writeln!(out, "  {}  {}", day.date, parts.join(" "));
            }
        }
        out
    }

    /// One CSV row per day: date, rows, filters, then one column per
    /// label seen anywhere in the period.
    pub fn write_plot_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        let label_cols: Vec<&String> = self.labels.keys().collect();
        let mut header = vec!["date".to_string(), "rows".into(), "filters".into()];
        header.extend(label_cols.iter().map(|l| (*l).clone()));
        w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        for day in &self.days {
            let mut row = vec![day.date.to_string(), day.rows.to_string(), day.filters.to_string()];
            row.extend(
                label_cols.iter().map(|l| day.labels.get(*l).unwrap_or(&0).to_string()),
            );
            w.write_record(&row).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Statistics over every day in the `daily` tree.
pub fn stats_tree(layout: &Layout) -> Result<StatsReport> {
    let mut days = vec![];
    for date in layout.discover_daily_days()? {
        let table = read_parquet(layout.daily_day(date).join(DAILY_FLOWS))?;
        let annotations = layout.interim_day(date).join(ANNOTATIONS_PARQUET);
        let filters = if annotations.exists() {
            read_parquet(&annotations)?.num_rows() as u64
        } else {
            0
        };
        days.push(DayStats {
            date,
            rows: table.num_rows() as u64,
            filters,
            labels: table_label_counts(&table)?,
        });
    }
    Ok(StatsReport::from_days(days))
}

/// Statistics over a single table file.
pub fn stats_table(path: impl AsRef<Path>) -> Result<StatsReport> {
    StatsReport::single_table(&read_parquet(path)?)
}
