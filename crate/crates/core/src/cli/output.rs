//! Tabular data files: CSV with a JSON metadata comment, or a JSON document.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` selects JSON; anything else is CSV.
    pub fn infer(path: Option<&Path>) -> Format {
        match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null),
            Cell::U(v) => Value::from(*v),
            Cell::B(v) => Value::Bool(*v),
            Cell::S(s) => Value::String(s.clone()),
            Cell::Null => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, meta: &Value, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = String::new();
                s.push_str("# ");
                s.push_str(&serde_json::to_string(meta).expect("metadata serialises"));
                s.push('\n');
                s.push_str(&self.columns.join(","));
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let m: Map<String, Value> =
                            self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                        Value::Object(m)
                    })
                    .collect();
                let doc = serde_json::json!({ "meta": meta, "records": records });
                let mut s = serde_json::to_string_pretty(&doc).expect("document serialises");
                s.push('\n');
                s
            }
        }
    }
}

/// Write to `path`, or to stdout when the path is absent or `-`.
pub fn emit(path: Option<&Path>, body: &str) -> io::Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, body)
        }
        _ => io::stdout().lock().write_all(body.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_precision() {
        let mut t = Table::new(&["t", "k", "flag"]);
        t.push(vec![0.1.into(), 3u64.into(), true.into()]);
        let s = t.render(&serde_json::json!({"a": 1}), Format::Csv);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# {\"a\":1}");
        assert_eq!(lines[1], "t,k,flag");
        assert_eq!(lines[2], "1.0000000000000001e-1,3,true");
        assert_eq!(lines[2].split(',').next().unwrap().parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn json_mirrors_records() {
        let mut t = Table::new(&["x"]);
        t.push(vec![Cell::Null]);
        let v: Value = serde_json::from_str(&t.render(&Value::Null, Format::Json)).unwrap();
        assert_eq!(v["records"][0]["x"], Value::Null);
    }

    #[test]
    fn format_inference() {
        assert_eq!(Format::infer(Some(Path::new("a/b.JSON"))), Format::Json);
        assert_eq!(Format::infer(Some(Path::new("a/b.csv"))), Format::Csv);
        assert_eq!(Format::infer(None), Format::Csv);
    }
}
