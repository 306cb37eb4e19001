//! Column-oriented datasets with a per-cell missing mask, and their CSV form.
//!
//! CSV files are UTF-8, comma-delimited, with a header row. An empty cell or
//! the literal `NA` marks a missing value; nothing else does.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no header")]
    NoHeader,
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("non-numeric value {value:?} in column {column:?} at row {row}")]
    NonNumeric { column: String, row: usize, value: String },
    #[error("column {0:?} has a length that differs from the other columns")]
    LengthMismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct Column {
    /// Cell values; masked cells hold NaN.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl Column {
    pub fn from_options(cells: &[Option<f64>]) -> Self {
        Column {
            values: cells.iter().map(|c| c.unwrap_or(f64::NAN)).collect(),
            missing: cells.iter().map(Option::is_none).collect(),
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Column { values, missing }
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        (!self.missing[i]).then(|| self.values[i])
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }
}

/// Columns are equal when their masks agree and observed values match;
/// whatever sits in masked cells is ignored.
impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.missing == other.missing
            && self.values.len() == other.values.len()
            && (0..self.values.len()).all(|i| self.missing[i] || self.values[i] == other.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    columns: IndexMap<String, Column>,
    nrows: usize,
}

impl Dataset {
    pub fn from_columns(cols: Vec<(String, Vec<Option<f64>>)>) -> Result<Self, DataError> {
        let mut ds = Dataset::default();
        for (name, cells) in cols {
            ds.insert(name, Column::from_options(&cells))?;
        }
        Ok(ds)
    }

    pub fn insert(&mut self, name: String, column: Column) -> Result<(), DataError> {
        if self.columns.contains_key(&name) {
            return Err(DataError::DuplicateColumn(name));
        }
        if self.columns.is_empty() {
            self.nrows = column.values.len();
        } else if column.values.len() != self.nrows {
            return Err(DataError::LengthMismatch(name));
        }
        self.columns.insert(name, column);
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Repeat columns `<name>1`, `<name>2`, ... in order, stopping at the first gap.
    pub fn repeat_columns(&self, name: &str) -> Vec<String> {
        (1..)
            .map(|k| format!("{name}{k}"))
            .take_while(|c| self.has_column(c))
            .collect()
    }

    /// Keeps only the rows for which `keep` is true.
    pub fn filter_rows(&self, keep: &[bool]) -> Dataset {
        let mut out = Dataset::default();
        for (name, col) in &self.columns {
            let column = Column { values: pick(&col.values, keep), missing: pick(&col.missing, keep) };
            out.insert(name.clone(), column).expect("columns are unique and aligned");
        }
        if self.columns.is_empty() {
            out.nrows = keep.iter().filter(|k| **k).count();
        }
        out
    }
}

fn parse_cell(raw: &str) -> Option<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s == "NA" {
        return Some(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Some(v)),
        _ => None,
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(DataError::NoHeader),
    };
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if names.iter().all(String::is_empty) {
        return Err(DataError::NoHeader);
    }
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(DataError::DuplicateColumn(n.clone()));
        }
    }

    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != names.len() {
            return Err(DataError::Ragged { row, found: rec.len(), expected: names.len() });
        }
        for (j, raw) in rec.iter().enumerate() {
            let v = parse_cell(raw).ok_or_else(|| DataError::NonNumeric {
                column: names[j].clone(),
                row,
                value: raw.to_string(),
            })?;
            cells[j].push(v);
        }
    }
    Dataset::from_columns(names.into_iter().zip(cells).collect())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    read_csv(file)
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.names())?;
    for i in 0..data.nrows() {
        let row: Vec<String> = data
            .columns()
            .map(|(_, c)| match c.get(i) {
                Some(v) => format!("{v}"),
                None => "NA".to_string(),
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| DataError::Io { path: "<csv writer>".into(), source })?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    write_csv(data, file)
}

fn pick<T: Copy>(v: &[T], keep: &[bool]) -> Vec<T> {
    v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect()
}
