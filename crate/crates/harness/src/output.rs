//! Result tables and their CSV / JSON serialization.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Version string written into every row.
pub const ARTIFACT_VERSION: &str = concat!("cfmimo-", env!("CARGO_PKG_VERSION"));

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Null,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Text form shared by both formats: floats in scientific notation with
    /// 17 significant digits, non-finite floats and nulls empty.
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Num(_) | Cell::Null => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

/// Rows with a fixed column list.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name).map(|c| &self.rows[row][c])
    }

    /// Row indices whose text column `name` equals `value`.
    pub fn select<'a>(&'a self, name: &str, value: &'a str) -> impl Iterator<Item = usize> + 'a {
        let c = self.column(name);
        (0..self.rows.len()).filter(move |&r| c.is_some_and(|c| self.rows[r][c].as_str() == Some(value)))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        Ok(String::from_utf8(w.into_inner().context("flushing CSV")?)?)
    }

    /// JSON array of row objects with keys in column order.
    pub fn to_json(&self) -> String {
        let mut out = String::from("[");
        for (r, row) in self.rows.iter().enumerate() {
            out.push_str(if r == 0 { "\n  {" } else { ",\n  {" });
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    out.push_str(", ");
                }
                out.push_str(&serde_json::to_string(&self.columns[c]).expect("string serializes"));
                out.push_str(": ");
                match cell {
                    Cell::Text(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
                    Cell::Num(v) if !v.is_finite() => out.push_str("null"),
                    Cell::Null => out.push_str("null"),
                    other => {
                        let _ = write!(out, "{}", other.render());
                    }
                }
            }
            out.push('}');
        }
        out.push_str(if self.rows.is_empty() { "]\n" } else { "\n]\n" });
        out
    }

    /// Inverse of [`ResultTable::to_json`]. Numbers with a fraction or
    /// exponent load as floats, the rest as integers.
    pub fn from_json(text: &str) -> Result<Self> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_str(text)?;
        let Some(first) = rows.first() else {
            return Ok(ResultTable { columns: Vec::new(), rows: Vec::new() });
        };
        let columns: Vec<String> = first.keys().cloned().collect();
        let mut table = ResultTable { columns, rows: Vec::new() };
        for obj in &rows {
            if obj.keys().ne(table.columns.iter()) {
                bail!("JSON rows disagree on their columns");
            }
            let row = obj
                .values()
                .map(|v| match v {
                    serde_json::Value::Null => Ok(Cell::Null),
                    serde_json::Value::String(s) => Ok(Cell::Text(s.clone())),
                    serde_json::Value::Number(n) => match n.as_i64() {
                        Some(i) => Ok(Cell::Int(i)),
                        None => n.as_f64().map(Cell::Num).context("unrepresentable number"),
                    },
                    other => bail!("unexpected JSON value {other}"),
                })
                .collect::<Result<Vec<_>>>()?;
            table.rows.push(row);
        }
        Ok(table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("unknown format {other:?} (expected csv or json)"),
        }
    }
}

pub fn render(table: &ResultTable, format: Format) -> Result<String> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => Ok(table.to_json()),
    }
}

pub fn emit_results(table: &ResultTable, format: Format, path: &Path) -> Result<()> {
    let text = render(table, format)?;
    let mut file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    file.write_all(text.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// `(index, value, probability)` sorted by value; ties keep their input
/// order and the last probability is 1.
pub fn empirical_cdf(values: &[f64]) -> Vec<(usize, f64, f64)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let n = values.len() as f64;
    order
        .into_iter()
        .enumerate()
        .map(|(rank, i)| (i, values[i], (rank + 1) as f64 / n))
        .collect()
}
