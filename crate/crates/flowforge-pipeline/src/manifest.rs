//! User-supplied manifest of raw inputs and its staging into the raw tree.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flowforge_core::{Error, Result};

use crate::layout::Layout;

/// One calendar day of raw inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub date: NaiveDate,
    pub capture: PathBuf,
    pub annotations: Vec<PathBuf>,
}

/// Parsed manifest, entries sorted by date, one entry per day.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

fn reject_url(path: &Path) -> Result<()> {
    if path.to_string_lossy().contains("://") {
        return Err(Error::Domain(format!(
            "network download is not supported; provide a local path instead of {}",
            path.display()
        )));
    }
    Ok(())
}

/// Parse a manifest CSV with columns `date,capture,annotations`, the last
/// being a `;`-separated list of annotation file paths. An empty file is
/// an empty manifest.
pub fn ingest_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Ok(Manifest::default());
    }
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|c| c == name).ok_or_else(|| {
            Error::Parse(format!("{}: manifest lacks a {name:?} column", path.display()))
        })
    };
    let (date_col, capture_col, annotations_col) =
        (col("date")?, col("capture")?, col("annotations")?);

    let mut entries: Vec<ManifestEntry> = vec![];
    let mut seen = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let row = i + 2; // 1-based, after the header
        let field = |c: usize| record.get(c).unwrap_or("");

        let date: NaiveDate = field(date_col).parse().map_err(|_| {
            Error::Parse(format!(
                "{} row {row}: bad date {:?}, expected YYYY-MM-DD",
                path.display(),
                field(date_col)
            ))
        })?;
        if !seen.insert(date) {
            return Err(Error::Validation(format!(
                "{} row {row}: duplicate date {date}",
                path.display()
            )));
        }
        if field(capture_col).is_empty() {
            return Err(Error::Validation(format!(
                "{} row {row}: missing capture path",
                path.display()
            )));
        }
        let capture = PathBuf::from(field(capture_col));
        reject_url(&capture)?;
        let annotations: Vec<PathBuf> = field(annotations_col)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect();
        if annotations.is_empty() {
            return Err(Error::Validation(format!(
                "{} row {row}: {date} lists no annotation files",
                path.display()
            )));
        }
        for a in &annotations {
            reject_url(a)?;
            match a.extension().and_then(|e| e.to_str()) {
                Some("csv") | Some("xml") => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "{} row {row}: unsupported annotation file {}; expected .csv or .xml",
                        path.display(),
                        a.display()
                    )))
                }
            }
        }
        entries.push(ManifestEntry { date, capture, annotations });
    }
    entries.sort_by_key(|e| e.date);
    Ok(Manifest { entries })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub days: u64,
    pub files_copied: u64,
}

fn copy_atomic(src: &Path, dst: &Path) -> Result<()> {
    let name = dst
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Contract(format!("bad destination {}", dst.display())))?;
    let tmp = dst.with_file_name(format!(".tmp.{name}"));
    fs::copy(src, &tmp).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(std::io::Error::other(format!("copying {}: {e}", src.display())))
    })?;
    fs::rename(&tmp, dst)?;
    Ok(())
}

/// Copy every manifest entry's files into the hive-partitioned raw tree.
/// Captures land as `capture.pcap[.gz]`; annotation files keep their
/// names under `annotations/`.
pub fn stage_raw(layout: &Layout, manifest: &Manifest) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    for entry in &manifest.entries {
        let day_dir = layout.raw_day(entry.date);
        let ann_dir = day_dir.join("annotations");
        fs::create_dir_all(&ann_dir)?;

        let gz = entry.capture.extension().and_then(|e| e.to_str()) == Some("gz");
        let capture_name = if gz { "capture.pcap.gz" } else { "capture.pcap" };
        copy_atomic(&entry.capture, &day_dir.join(capture_name))?;
        report.files_copied += 1;

        let mut names = BTreeSet::new();
        for a in &entry.annotations {
            let name = a
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::Validation(format!("bad annotation path {}", a.display())))?;
            if !names.insert(name.to_string()) {
                return Err(Error::Validation(format!(
                    "{}: two annotation files named {name:?}",
                    entry.date
                )));
            }
            copy_atomic(a, &ann_dir.join(name))?;
            report.files_copied += 1;
        }
        report.days += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn empty_file_is_an_empty_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(tmp.path(), "manifest.csv", "");
        assert_eq!(ingest_manifest(&p).unwrap(), Manifest::default());
    }

    #[test]
    fn three_rows_make_three_days() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(
            tmp.path(),
            "manifest.csv",
            "date,capture,annotations\n\
             2011-01-13,/d/b.pcap,/d/b.csv\n\
             2011-01-12,/d/a.pcap.gz,/d/a.csv;/d/a.xml\n\
             2011-01-14,/d/c.pcap,/d/c.xml\n",
        );
        let m = ingest_manifest(&p).unwrap();
        assert_eq!(m.entries.len(), 3);
        let dates: Vec<String> = m.entries.iter().map(|e| e.date.to_string()).collect();
        assert_eq!(dates, ["2011-01-12", "2011-01-13", "2011-01-14"]);
        assert_eq!(m.entries[0].annotations.len(), 2);
    }

    #[test]
    fn duplicate_date_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(
            tmp.path(),
            "manifest.csv",
            "date,capture,annotations\n\
             2011-01-12,/d/a.pcap,/d/a.csv\n\
             2011-01-12,/d/b.pcap,/d/b.csv\n",
        );
        let err = ingest_manifest(&p).err().expect("must fail");
        assert_eq!(err.category(), "validation");
        assert!(err.to_string().contains("duplicate date"), "{err}");
    }

    #[test]
    fn urls_and_incomplete_rows_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let url = write(
            tmp.path(),
            "url.csv",
            "date,capture,annotations\n2011-01-12,https://x/20110112.pcap,/d/a.csv\n",
        );
        assert_eq!(ingest_manifest(&url).err().expect("must fail").category(), "domain");

        let no_ann = write(
            tmp.path(),
            "no_ann.csv",
            "date,capture,annotations\n2011-01-12,/d/a.pcap,\n",
        );
        assert_eq!(ingest_manifest(&no_ann).err().expect("must fail").category(), "validation");

        let bad_ext = write(
            tmp.path(),
            "bad_ext.csv",
            "date,capture,annotations\n2011-01-12,/d/a.pcap,/d/a.txt\n",
        );
        assert_eq!(ingest_manifest(&bad_ext).err().expect("must fail").category(), "validation");
    }

    #[test]
    fn staging_copies_into_the_hive_tree() {
        let tmp = tempfile::tempdir().unwrap();
        let src = tmp.path().join("src");
        fs::create_dir_all(&src).unwrap();
        let cap = write(&src, "x.pcap", "cap");
        let ann = write(&src, "x.csv", "ann");
        let manifest = Manifest {
            entries: vec![ManifestEntry {
                date: NaiveDate::from_ymd_opt(2011, 1, 12).unwrap(),
                capture: cap,
                annotations: vec![ann],
            }],
        };
        let layout = Layout::new(tmp.path().join("data"));
        let report = stage_raw(&layout, &manifest).unwrap();
        assert_eq!(report, IngestReport { days: 1, files_copied: 2 });
        let day = layout.raw_day(manifest.entries[0].date);
        assert_eq!(fs::read_to_string(day.join("capture.pcap")).unwrap(), "cap");
        assert_eq!(
            fs::read_to_string(day.join("annotations/x.csv")).unwrap(),
            "ann"
        );
    }
}
