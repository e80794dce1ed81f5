//! Tabular reports rendered as CSV (header row first) or JSON lines. Both
//! renderings come from the same cells, so their numbers always agree.

use crate::error::CliError;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Str(String),
    Bool(bool),
    Null,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Null
        }
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // integers beyond i64 are never produced, but stay lossless
            Cell::Int(v) => i64::try_from(*v).map_or_else(|_| Value::String(v.to_string()), Value::from),
            Cell::Float(v) => Value::from(*v),
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Null => Value::Null,
        }
    }
}

pub type Row = Vec<(String, Cell)>;

#[derive(Debug, Clone, Default)]
pub struct Report {
    columns: Vec<String>,
    rows: Vec<Row>,
}

impl Report {
    /// `columns` fixes the leading column order, so even an empty report
    /// has a header.
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        for (name, _) in &row {
            if !self.columns.contains(name) {
                self.columns.push(name.clone());
            }
        }
        self.rows.push(row);
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    fn cell<'a>(row: &'a Row, column: &str) -> Option<&'a Cell> {
        row.iter().find(|(name, _)| name == column).map(|(_, c)| c)
    }

    pub fn write_to(&self, out: &mut dyn Write, format: Format) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(
                        self.columns
                            .iter()
                            .map(|c| Self::cell(row, c).map_or_else(String::new, Cell::csv)),
                    )?;
                }
                w.flush()
            }
            Format::Json => {
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .map(|c| (c.clone(), Self::cell(row, c).map_or(Value::Null, Cell::json)))
                        .collect();
                    writeln!(out, "{}", Value::Object(obj))?;
                }
                Ok(())
            }
        }
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn emit(&self, path: Option<&Path>, format: Format) -> Result<(), CliError> {
        match path {
            Some(p) => {
                let mut f = std::fs::File::create(p).map_err(|e| CliError::io(p, e))?;
                self.write_to(&mut f, format).map_err(|e| CliError::io(p, e))
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                self.write_to(&mut lock, format)
                    .map_err(|e| CliError::io("<stdout>", e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(r: &Report, f: Format) -> String {
        let mut buf = Vec::new();
        r.write_to(&mut buf, f).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_and_json_share_cells() {
        let mut r = Report::new(&["a"]);
        r.push(vec![("a".into(), 1u64.into()), ("b".into(), 0.5.into())]);
        r.push(vec![("a".into(), 2u64.into()), ("c".into(), "x,y".into())]);
        assert_eq!(render(&r, Format::Csv), "a,b,c\n1,0.5,\n2,,\"x,y\"\n");
        assert_eq!(
            render(&r, Format::Json),
            "{\"a\":1,\"b\":0.5,\"c\":null}\n{\"a\":2,\"b\":null,\"c\":\"x,y\"}\n"
        );
    }

    #[test]
    fn empty_report_keeps_header() {
        assert_eq!(render(&Report::new(&["x", "y"]), Format::Csv), "x,y\n");
        assert_eq!(render(&Report::new(&["x"]), Format::Json), "");
        assert_eq!(Cell::from(f64::NAN), Cell::Null);
    }
}
