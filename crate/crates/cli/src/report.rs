//! Tabular report assembly and CSV/JSON emission.
//!
//! Columns carry their units in the header name (`t_seq_ms`,
//! `gamma1_per_sqrt_s`, ...). Numbers are written in the shortest
//! representation that round-trips, so re-parsing a report reproduces the
//! exact values.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    /// Missing value (e.g. T2 columns of a T1-only protocol).
    Blank,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(x) => format_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Blank => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => serde_json::Value::String(s.clone()),
            Cell::Num(x) => serde_json::Number::from_f64(*x)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::Int(i) => serde_json::Value::Number((*i).into()),
            Cell::Blank => serde_json::Value::Null,
        }
    }
}

/// Shortest round-trip decimal form; non-finite values are spelled out so
/// the report loader can reject them loudly.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        let mut s = String::new();
        write!(s, "{x}").expect("write to string");
        s
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One schema-tagged table of report rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ReportTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("#schema=1\n");
        out.push_str(&format!("#table={}\n", self.name));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (col, cell) in self.columns.iter().zip(row) {
                    obj.insert(col.clone(), cell.json());
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({
            "schema": 1,
            "table": self.name,
            "rows": rows,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Column index by name.
    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Writes each table to `<dir>/<table-name>.<ext>`.
pub fn write_tables(
    tables: &[ReportTable],
    dir: &Path,
    format: OutputFormat,
) -> io::Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let mut paths = Vec::new();
    for t in tables {
        let path = dir.join(format!("{}.{ext}", t.name));
        fs::write(&path, t.render(format))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Prints tables to stdout, separated by their schema headers.
pub fn print_tables(tables: &[ReportTable], format: OutputFormat) {
    for t in tables {
        print!("{}", t.render(format));
        println!();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_numeric_cells() {
        let mut t = ReportTable::new("demo", &["a", "b"]);
        let values = [
            1.0 / 3.0,
            2711.6340124442898,
            -4.217e-7,
            54500.0,
            f64::MIN_POSITIVE,
        ];
        for &v in &values {
            t.push(vec![Cell::Num(v), Cell::Text("x".into())]);
        }
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("#schema=1"));
        assert_eq!(lines.next(), Some("#table=demo"));
        assert_eq!(lines.next(), Some("a,b"));
        for (&v, line) in values.iter().zip(lines) {
            let cell = line.split(',').next().unwrap();
            let parsed: f64 = cell.parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "cell {cell}");
        }
    }

    #[test]
    fn json_mirrors_rows() {
        let mut t = ReportTable::new("demo", &["name", "value"]);
        t.push(vec![Cell::Text("cir".into()), Cell::Num(17.07)]);
        let parsed: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(parsed["schema"], 1);
        assert_eq!(parsed["rows"][0]["name"], "cir");
        assert_eq!(parsed["rows"][0]["value"], 17.07);
    }
}
