//! A small column-typed in-memory table.
//!
//! Deliberately minimal — three cell types (int64, float64, utf8),
//! nullable everywhere — because that is exactly what the flow schema and
//! its preprocessing need. Persistence lives in [`mod@parquet_io`] (columnar
//! artifacts) and [`mod@csv_io`] (human-readable mirrors).

mod csv_io;
mod parquet_io;

pub use csv_io::write_csv;
pub(crate) use csv_io::csv_err;
pub use parquet_io::{read_parquet, write_parquet};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    Int64,
    Float64,
    Utf8,
}

/// One cell; `Null` is an absent value of any dtype.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Null,
    I64(i64),
    F64(f64),
    Str(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Int64(Vec<Option<i64>>),
    Float64(Vec<Option<f64>>),
    Utf8(Vec<Option<String>>),
}

impl ColumnData {
    pub fn new(dtype: DType) -> Self {
        match dtype {
            DType::Int64 => ColumnData::Int64(vec![]),
            DType::Float64 => ColumnData::Float64(vec![]),
            DType::Utf8 => ColumnData::Utf8(vec![]),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            ColumnData::Int64(_) => DType::Int64,
            ColumnData::Float64(_) => DType::Float64,
            ColumnData::Utf8(_) => DType::Utf8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int64(v) => v.len(),
            ColumnData::Float64(v) => v.len(),
            ColumnData::Utf8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, row: usize) -> Cell {
        match self {
            ColumnData::Int64(v) => v[row].map_or(Cell::Null, Cell::I64),
            ColumnData::Float64(v) => v[row].map_or(Cell::Null, Cell::F64),
            ColumnData::Utf8(v) => v[row].clone().map_or(Cell::Null, Cell::Str),
        }
    }

    fn push(&mut self, cell: Cell, column: &str) -> Result<()> {
        match (self, cell) {
            (ColumnData::Int64(v), Cell::I64(x)) => v.push(Some(x)),
            (ColumnData::Int64(v), Cell::Null) => v.push(None),
            (ColumnData::Float64(v), Cell::F64(x)) => v.push(Some(x)),
            (ColumnData::Float64(v), Cell::Null) => v.push(None),
            (ColumnData::Utf8(v), Cell::Str(x)) => v.push(Some(x)),
            (ColumnData::Utf8(v), Cell::Null) => v.push(None),
            (data, cell) => {
                return Err(Error::Schema(format!(
                    "column {column:?} is {:?} but got cell {cell:?}",
                    data.dtype()
                )))
            }
        }
        Ok(())
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Int64(v) => ColumnData::Int64(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Float64(v) => ColumnData::Float64(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Utf8(v) => {
                ColumnData::Utf8(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }

    fn append(&mut self, other: &ColumnData) {
        match (self, other) {
            (ColumnData::Int64(a), ColumnData::Int64(b)) => a.extend_from_slice(b),
            (ColumnData::Float64(a), ColumnData::Float64(b)) => a.extend_from_slice(b),
            (ColumnData::Utf8(a), ColumnData::Utf8(b)) => a.extend(b.iter().cloned()),
            _ => unreachable!("schema checked by caller"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

/// Immutable-ish table: columns of equal length with unique names.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    columns: Vec<Column>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if let Some(first) = columns.first() {
            let len = first.data.len();
            for c in &columns {
                if c.data.len() != len {
                    return Err(Error::Schema(format!(
                        "column {:?} has {} rows, expected {len}",
                        c.name,
                        c.data.len()
                    )));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if c.name.is_empty() || !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!(
                    "empty or duplicate column name {:?}",
                    c.name
                )));
            }
        }
        Ok(Table { columns })
    }

    /// Empty table with the given schema.
    pub fn empty(schema: &[(&str, DType)]) -> Self {
        Table {
            columns: schema
                .iter()
                .map(|(name, dtype)| Column {
                    name: (*name).to_string(),
                    data: ColumnData::new(*dtype),
                })
                .collect(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn schema(&self) -> Vec<(&str, DType)> {
        self.columns
            .iter()
            .map(|c| (c.name.as_str(), c.data.dtype()))
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|c| c.name == name).map(|c| &c.data)
    }

    /// The column, or a schema error naming it.
    pub fn require(&self, name: &str) -> Result<&ColumnData> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut ColumnData> {
        self.columns
            .iter_mut()
            .find(|c| c.name == name)
            .map(|c| &mut c.data)
    }

    /// Append a row of cells in schema order.
    pub fn push_row(&mut self, cells: Vec<Cell>) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "row has {} cells, table has {} columns",
                cells.len(),
                self.columns.len()
            )));
        }
        for (col, cell) in self.columns.iter_mut().zip(cells) {
            col.data.push(cell, &col.name)?;
        }
        Ok(())
    }

    pub fn row(&self, idx: usize) -> Vec<Cell> {
        self.columns.iter().map(|c| c.data.cell(idx)).collect()
    }

    /// Materialize the given row indices (repeats and reorders allowed).
    pub fn take(&self, rows: &[usize]) -> Table {
        Table {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
        }
    }

    /// Concatenate tables with identical schemas.
    pub fn concat(tables: &[Table]) -> Result<Table> {
        let mut iter = tables.iter();
        let mut out = match iter.next() {
            Some(t) => t.clone(),
            None => return Ok(Table::default()),
        };
        for t in iter {
            if t.schema() != out.schema() {
                return Err(Error::Schema(format!(
                    "cannot concatenate: schema {:?} != {:?}",
                    t.schema(),
                    out.schema()
                )));
            }
            for (dst, src) in out.columns.iter_mut().zip(&t.columns) {
                dst.data.append(&src.data);
            }
        }
        Ok(out)
    }

    /// Drop a column by name; error if absent.
    pub fn drop_column(&mut self, name: &str) -> Result<Column> {
        match self.columns.iter().position(|c| c.name == name) {
            Some(idx) => Ok(self.columns.remove(idx)),
            None => Err(Error::Schema(format!("missing column {name:?}"))),
        }
    }

    /// Insert a column at a position (append if `at` is past the end).
    pub fn insert_column(&mut self, at: usize, column: Column) -> Result<()> {
        if !self.columns.is_empty() && column.data.len() != self.num_rows() {
            return Err(Error::Schema(format!(
                "column {:?} has {} rows, table has {}",
                column.name,
                column.data.len(),
                self.num_rows()
            )));
        }
        if self.column(&column.name).is_some() {
            return Err(Error::Schema(format!(
                "duplicate column name {:?}",
                column.name
            )));
        }
        self.columns.insert(at.min(self.columns.len()), column);
        Ok(())
    }

    /// SHA-256 over a canonical serialization of schema plus cells; stable
    /// across runs and platforms, used for cache keys and fingerprints.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.name.as_bytes());
            h.update([0u8, match c.data.dtype() {
                DType::Int64 => 1,
                DType::Float64 => 2,
                DType::Utf8 => 3,
            }]);
            match &c.data {
                ColumnData::Int64(v) => {
                    for x in v {
                        match x {
                            Some(x) => {
                                h.update([1]);
                                h.update(x.to_le_bytes());
                            }
                            None => h.update([0]),
                        }
                    }
                }
                ColumnData::Float64(v) => {
                    for x in v {
                        match x {
                            Some(x) => {
                                h.update([1]);
                                h.update(x.to_le_bytes());
                            }
                            None => h.update([0]),
                        }
                    }
                }
                ColumnData::Utf8(v) => {
                    for x in v {
                        match x {
                            Some(x) => {
                                h.update([1]);
                                h.update((x.len() as u64).to_le_bytes());
                                h.update(x.as_bytes());
                            }
                            None => h.update([0]),
                        }
                    }
                }
            }
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
