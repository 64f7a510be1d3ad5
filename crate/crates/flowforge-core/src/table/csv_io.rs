//! CSV mirror output. Null cells render as empty fields; floats use
//! Rust's shortest round-trip formatting, which is deterministic.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::Result;

use super::{Cell, Table};

/// Write `table` with a header row to `path`.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(table.column_names())
        .map_err(csv_err)?;
    let mut record = csv::StringRecord::new();
    for row in 0..table.num_rows() {
        record.clear();
        for c in table.columns() {
            match c.data.cell(row) {
                Cell::Null => record.push_field(""),
                Cell::I64(v) => record.push_field(&v.to_string()),
                Cell::F64(v) => record.push_field(&v.to_string()),
                Cell::Str(v) => record.push_field(&v),
            }
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| crate::Error::Parse(format!("csv flush: {e}")))?
        .flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::Parse(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::DType;

    #[test]
    fn csv_renders_nulls_as_empty() {
        let mut t = Table::empty(&[("name", DType::Utf8), ("v", DType::Float64)]);
        t.push_row(vec![Cell::Str("a,b".into()), Cell::F64(0.5)]).unwrap();
        t.push_row(vec![Cell::Null, Cell::Null]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "name,v\n\"a,b\",0.5\n,\n");
    }
}
