//! Parquet persistence for [`Table`].
//!
//! Files are written uncompressed in a single row group with all columns
//! optional; writes are deterministic byte-for-byte given the same table,
//! which the pipeline's content-addressed caching relies on.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use parquet::basic::{Compression, LogicalType, Repetition, Type as PhysicalType};
use parquet::data_type::{ByteArray, ByteArrayType, DoubleType, Int64Type};
use parquet::file::properties::WriterProperties;
use parquet::file::reader::{FileReader, SerializedFileReader};
use parquet::file::writer::SerializedFileWriter;
use parquet::record::Field;
use parquet::schema::types::Type;

use crate::{Error, Result};

use super::{Cell, Column, ColumnData, DType, Table};

impl From<parquet::errors::ParquetError> for Error {
    fn from(e: parquet::errors::ParquetError) -> Self {
        Error::Parse(format!("parquet: {e}"))
    }
}

fn parquet_schema(table: &Table) -> Result<Arc<Type>> {
    let mut fields = Vec::with_capacity(table.num_columns());
    for c in table.columns() {
        let builder = match c.data.dtype() {
            DType::Int64 => Type::primitive_type_builder(&c.name, PhysicalType::INT64),
            DType::Float64 => Type::primitive_type_builder(&c.name, PhysicalType::DOUBLE),
            DType::Utf8 => Type::primitive_type_builder(&c.name, PhysicalType::BYTE_ARRAY)
                .with_logical_type(Some(LogicalType::String)),
        };
        fields.push(Arc::new(
            builder.with_repetition(Repetition::OPTIONAL).build()?,
        ));
    }
    Ok(Arc::new(
        Type::group_type_builder("table").with_fields(fields).build()?,
    ))
}

/// Write `table` to `path` as an uncompressed Parquet file.
pub fn write_parquet(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let props = Arc::new(
        WriterProperties::builder()
            .set_compression(Compression::UNCOMPRESSED)
            .build(),
    );
    let file = File::create(path)?;
    let mut writer = SerializedFileWriter::new(file, parquet_schema(table)?, props)?;
    let mut group = writer.next_row_group()?;
    for c in table.columns() {
        let mut col = group
            .next_column()?
            .expect("schema has as many columns as the table");
        match &c.data {
            ColumnData::Int64(v) => {
                let (values, defs) = split_nulls(v, |x| *x);
                col.typed::<Int64Type>().write_batch(&values, Some(&defs), None)?;
            }
            ColumnData::Float64(v) => {
                let (values, defs) = split_nulls(v, |x| *x);
                col.typed::<DoubleType>().write_batch(&values, Some(&defs), None)?;
            }
            ColumnData::Utf8(v) => {
                let (values, defs) = split_nulls(v, |s| ByteArray::from(s.as_str()));
                col.typed::<ByteArrayType>().write_batch(&values, Some(&defs), None)?;
            }
        }
        col.close()?;
    }
    group.close()?;
    writer.close()?;
    Ok(())
}

fn split_nulls<T, U>(cells: &[Option<T>], mut conv: impl FnMut(&T) -> U) -> (Vec<U>, Vec<i16>) {
    let mut values = Vec::with_capacity(cells.len());
    let mut defs = Vec::with_capacity(cells.len());
    for c in cells {
        match c {
            Some(x) => {
                values.push(conv(x));
                defs.push(1);
            }
            None => defs.push(0),
        }
    }
    (values, defs)
}

/// Read a Parquet file produced by [`write_parquet`] back into a [`Table`].
pub fn read_parquet(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let reader = SerializedFileReader::new(File::open(path)?)?;
    let descr = reader.metadata().file_metadata().schema_descr_ptr();
    let mut table = {
        let mut columns = vec![];
        for i in 0..descr.num_columns() {
            let col = descr.column(i);
            let dtype = match col.physical_type() {
                PhysicalType::INT64 => DType::Int64,
                PhysicalType::DOUBLE => DType::Float64,
                PhysicalType::BYTE_ARRAY => DType::Utf8,
                other => {
                    return Err(Error::Schema(format!(
                        "{}: unsupported parquet physical type {other} in column {:?}",
                        path.display(),
                        col.name()
                    )))
                }
            };
            columns.push(Column {
                name: col.name().to_string(),
                data: ColumnData::new(dtype),
            });
        }
        Table::new(columns)?
    };
    for row in reader.get_row_iter(None)? {
        let row = row?;
        let cells = row
            .get_column_iter()
            .map(|(_, field)| match field {
                Field::Null => Ok(Cell::Null),
                Field::Long(v) => Ok(Cell::I64(*v)),
                Field::Double(v) => Ok(Cell::F64(*v)),
                Field::Str(s) => Ok(Cell::Str(s.clone())),
                other => Err(Error::Schema(format!(
                    "{}: unsupported parquet value {other:?}",
                    path.display()
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        table.push_row(cells)?;
    }
    Ok(table)
}
