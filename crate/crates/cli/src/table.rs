//! Result tables and their CSV / JSON serializations.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

/// Significant digits written for every number, in both formats.
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Column {
            name: name.to_string(),
            unit: unit.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Table {
            columns,
            ..Table::default()
        }
    }

    /// Appends a computed row, or on failure the row's input cells padded with NaN
    /// and an entry in `errors`.
    pub fn push(&mut self, inputs: Vec<Cell>, result: Result<Vec<Cell>, String>) {
        let row = self.rows.len();
        let mut cells = inputs;
        match result {
            Ok(out) => cells.extend(out),
            Err(message) => {
                self.errors.push(RowError { row, message });
                cells.resize(self.columns.len(), Cell::Num(f64::NAN));
            }
        }
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric column by name; text cells read as NaN.
    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[i] {
                    Cell::Num(x) => *x,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] and printed in scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(table: &Table, mut out: W) -> io::Result<()> {
    let header: Vec<String> = table.columns.iter().map(|c| csv_field(&c.name)).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in &table.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => format_number(*x),
                Cell::Text(s) => csv_field(s),
            })
            .collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn json_cell(c: &Cell) -> Value {
    match c {
        Cell::Num(x) if x.is_finite() => {
            let rounded: f64 = format_number(*x).parse().unwrap_or(*x);
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Cell::Num(_) => Value::Null,
        Cell::Text(s) => Value::String(s.clone()),
    }
}

pub fn rows_json(table: &Table) -> Value {
    Value::Array(
        table
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(json_cell).collect()))
            .collect(),
    )
}

/// Provenance of a run, written beside CSV output or inline in JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_sha256: String,
    /// Fully resolved configuration; feeding it back reproduces the table.
    pub resolved_config: String,
    pub generated_at: String,
    pub threads: usize,
    pub seed: Option<u64>,
    pub columns: Vec<Column>,
    pub warnings: Vec<String>,
    pub errors: Vec<RowError>,
}

pub fn write_json<W: Write>(table: &Table, meta: &Metadata, mut out: W) -> io::Result<()> {
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    let doc = serde_json::json!({
        "metadata": meta,
        "columns": names,
        "rows": rows_json(table),
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)
}
