//! Numeric CSV input and output.
//!
//! Files are comma-separated with an optional header. The first record is a
//! header when any of its fields is not a number. Numbers are parsed with the
//! decimal point regardless of locale; NaN and infinities are rejected.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::points::Points;

/// Streams numeric rows from CSV text.
pub struct RowReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    header: Option<Vec<String>>,
    first: Option<csv::StringRecord>,
    width: Option<usize>,
    line: u64,
}

impl RowReader<File> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
        RowReader::new(file)
    }
}

impl<R: Read> RowReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut records = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input)
            .into_records();
        let mut header = None;
        let mut first = None;
        let mut width = None;
        let mut line = 0;
        if let Some(record) = records.next() {
            let record = record.map_err(|e| Error::data(format!("malformed CSV: {e}")))?;
            line = 1;
            if record.iter().any(|f| parse_number(f).is_none()) {
                width = Some(record.len());
                header = Some(record.iter().map(str::to_owned).collect());
            } else {
                first = Some(record);
            }
        }
        Ok(RowReader {
            records,
            header,
            first,
            width,
            line,
        })
    }

    pub fn header(&self) -> Option<&[String]> {
        self.header.as_deref()
    }

    fn column_name(&self, j: usize) -> String {
        match self.header.as_ref().and_then(|h| h.get(j)) {
            Some(name) => format!("column {} ({name:?})", j + 1),
            None => format!("column {}", j + 1),
        }
    }

    fn convert(&mut self, record: &csv::StringRecord, line: u64) -> Result<Vec<f64>> {
        let width = *self.width.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::data(format!(
                "row {line} has {} fields, expected {width}",
                record.len()
            )));
        }
        record
            .iter()
            .enumerate()
            .map(|(j, field)| match parse_number(field) {
                Some(v) if v.is_finite() => Ok(v),
                Some(_) => Err(Error::data(format!(
                    "row {line}, {}: non-finite value {field:?}",
                    self.column_name(j)
                ))),
                None => Err(Error::data(format!(
                    "row {line}, {}: non-numeric value {field:?}",
                    self.column_name(j)
                ))),
            })
            .collect()
    }
}

impl<R: Read> Iterator for RowReader<R> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(first) = self.first.take() {
            return Some(self.convert(&first, 1));
        }
        let record = self.records.next()?;
        self.line += 1;
        let line = self.line;
        Some(
            record
                .map_err(|e| Error::data(format!("row {line}: malformed CSV: {e}")))
                .and_then(|r| self.convert(&r, line)),
        )
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.parse::<f64>().ok()
}

/// Reads a whole CSV file into memory.
pub fn read_points(path: &Path) -> Result<Points> {
    collect_points(RowReader::open(path)?)
}

pub fn read_points_from<R: Read>(input: R) -> Result<Points> {
    collect_points(RowReader::new(input)?)
}

fn collect_points<R: Read>(reader: RowReader<R>) -> Result<Points> {
    let header_width = reader.header().map(<[String]>::len);
    let mut values = Vec::new();
    let mut dim = None;
    for row in reader {
        let row = row?;
        dim.get_or_insert(row.len());
        values.extend(row);
    }
    match dim.or(header_width) {
        Some(d) if d > 0 => Points::new(d, values),
        _ => Err(Error::data("CSV input has no columns")),
    }
}

/// Writes rows of numbers, one record per line, with an optional header.
pub fn write_rows<W: Write>(out: W, header: Option<&[String]>, points: &Points) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    if let Some(h) = header {
        writer.write_record(h).map_err(csv_io_error)?;
    }
    for row in points.rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(csv_io_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_points(path: &Path, header: Option<&[String]>, points: &Points) -> Result<()> {
    write_rows(File::create(path)?, header, points)
}

/// Default header `x1,…,xd`.
pub fn default_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}

fn csv_io_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::data(format!("{other:?}")),
    }
}
