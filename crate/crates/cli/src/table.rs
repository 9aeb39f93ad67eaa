//! Result tables and their CSV and JSON encodings.
//!
//! CSV floats carry 12 significant digits and always include a decimal point
//! or exponent, so a re-parsed file keeps its cell types. JSON keeps full
//! precision.

use bcmac_core::prob::LogBase;
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Version of the JSON payload layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Significant digits of CSV floats.
pub const CSV_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("payload is missing field `{0}`")]
    Missing(&'static str),
    #[error("unsupported schema version {0}")]
    Schema(u64),
    #[error("row {row} has {actual} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, actual: usize },
    #[error("cell {0} is not a scalar")]
    BadCell(String),
    #[error("unknown unit `{0}`")]
    Unit(String),
}

/// A single table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
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

    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(x) => format_sig(*x, CSV_DIGITS),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn from_csv(field: &str) -> Cell {
        if field.is_empty() {
            return Cell::Empty;
        }
        match field {
            "true" => return Cell::Bool(true),
            "false" => return Cell::Bool(false),
            _ => {}
        }
        if field.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(v) = field.parse() {
                return Cell::Int(v);
            }
        }
        let numeric = field
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'-' | b'+'));
        if numeric {
            if let Ok(x) = field.parse() {
                return Cell::Num(x);
            }
        }
        Cell::Text(field.to_string())
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Num(x) => json!(x),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }

    fn from_json(v: &Value) -> Result<Cell, TableError> {
        Ok(match v {
            Value::Null => Cell::Empty,
            Value::Bool(b) => Cell::Bool(*b),
            Value::String(s) => Cell::Text(s.clone()),
            Value::Number(x) => match x.as_u64() {
                Some(u) if !x.is_f64() => Cell::Int(u),
                _ => Cell::Num(x.as_f64().ok_or_else(|| TableError::BadCell(x.to_string()))?),
            },
            other => return Err(TableError::BadCell(other.to_string())),
        })
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Formats `x` with `digits` significant digits, trimming trailing zeros
/// but keeping a decimal point or exponent.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').to_string()
        } else {
            s
        };
        if s.ends_with('.') {
            format!("{s}0")
        } else if !s.contains('.') {
            format!("{s}.0")
        } else {
            s
        }
    } else {
        let s = format!("{:.*e}", digits - 1, x);
        let (mantissa, exponent) = s.split_once('e').expect("scientific format");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exponent}")
    }
}

/// A payload table: a kind tag, the unit of its rate columns, fixed column
/// names and rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub unit: LogBase,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(kind: &str, unit: LogBase, columns: &[&str]) -> Self {
        Table {
            kind: kind.into(),
            unit,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.kind);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All cells of column `name`.
    pub fn column_cells(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Header row then one line per row. Kind and unit live in the sidecar.
    pub fn to_csv(&self) -> Result<String, TableError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv))?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses CSV produced by [`Table::to_csv`]; kind and unit are supplied
    /// by the caller.
    pub fn from_csv(text: &str, kind: &str, unit: LogBase) -> Result<Table, TableError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != columns.len() {
                return Err(TableError::Ragged {
                    row: i + 1,
                    expected: columns.len(),
                    actual: rec.len(),
                });
            }
            rows.push(rec.iter().map(Cell::from_csv).collect());
        }
        Ok(Table {
            kind: kind.into(),
            unit,
            columns,
            rows,
        })
    }

    pub fn to_json_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        obj.insert("kind".into(), json!(self.kind));
        obj.insert("unit".into(), json!(self.unit.as_str()));
        obj.insert("columns".into(), json!(self.columns));
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        obj.insert("rows".into(), Value::Array(rows));
        Value::Object(obj)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("table serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Table, TableError> {
        let v: Value = serde_json::from_str(text)?;
        let version = v
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or(TableError::Missing("schema_version"))?;
        if version != SCHEMA_VERSION as u64 {
            return Err(TableError::Schema(version));
        }
        let kind = v.get("kind").and_then(Value::as_str).ok_or(TableError::Missing("kind"))?;
        let unit = v.get("unit").and_then(Value::as_str).ok_or(TableError::Missing("unit"))?;
        let unit: LogBase = unit.parse().map_err(|_| TableError::Unit(unit.to_string()))?;
        let columns: Vec<String> = v
            .get("columns")
            .and_then(Value::as_array)
            .ok_or(TableError::Missing("columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| TableError::BadCell(c.to_string())))
            .collect::<Result<_, _>>()?;
        let raw_rows = v.get("rows").and_then(Value::as_array).ok_or(TableError::Missing("rows"))?;
        let mut rows = Vec::with_capacity(raw_rows.len());
        for (i, r) in raw_rows.iter().enumerate() {
            let cells = r.as_array().ok_or_else(|| TableError::BadCell(r.to_string()))?;
            if cells.len() != columns.len() {
                return Err(TableError::Ragged {
                    row: i + 1,
                    expected: columns.len(),
                    actual: cells.len(),
                });
            }
            rows.push(cells.iter().map(Cell::from_json).collect::<Result<_, _>>()?);
        }
        Ok(Table {
            kind: kind.into(),
            unit,
            columns,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.5 * 11f64.ln(), 12), "1.1989476364");
        assert_eq!(format_sig(2.0, 12), "2.0");
        assert_eq!(format_sig(-0.25, 12), "-0.25");
        assert_eq!(format_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_sig(1.5e-9, 12), "1.5e-9");
        assert_eq!(format_sig(123456.0, 12), "123456.0");
        assert_eq!(format_sig(0.0, 12), "0.0");
    }

    #[test]
    fn csv_cells_keep_their_type() {
        let mut t = Table::new("demo", LogBase::Bits, &["a", "b", "c", "d", "e"]);
        t.push(vec![Cell::Int(3), Cell::Num(3.0), Cell::Bool(true), "x,y".into(), Cell::Empty]);
        let text = t.to_csv().unwrap();
        assert_eq!(text, "a,b,c,d,e\n3,3.0,true,\"x,y\",\n");
        assert_eq!(Table::from_csv(&text, "demo", LogBase::Bits).unwrap(), t);
    }

    #[test]
    fn json_is_exact() {
        let mut t = Table::new("demo", LogBase::Nats, &["x", "k", "s"]);
        t.push(vec![Cell::Num(0.1 + 0.2), Cell::Int(u64::MAX), Cell::Empty]);
        t.push(vec![Cell::Num(2.0), Cell::Int(0), "ok".into()]);
        assert_eq!(Table::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn json_needs_schema_version() {
        assert!(matches!(
            Table::from_json(r#"{"kind":"a","unit":"nats","columns":[],"rows":[]}"#),
            Err(TableError::Missing("schema_version"))
        ));
    }
}
