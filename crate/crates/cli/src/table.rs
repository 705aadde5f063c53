//! Row-oriented output shared by every command.
//!
//! Numbers are always written with 17 significant digits in scientific
//! notation; JSON output is an array of objects keyed by the CSV header.

use std::io::{self, Write};

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

/// `{:.16e}` prints 17 significant digits; non-finite values keep Rust's spelling.
pub fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: &mut W, format: Format) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => number(*v),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => csv_field(s),
                    Cell::Empty => String::new(),
                })
                .collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    fn write_json<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "[")?;
        for (i, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row)
                .map(|(k, c)| {
                    let v = match c {
                        Cell::Num(v) if v.is_finite() => number(*v),
                        Cell::Num(_) | Cell::Empty => "null".to_owned(),
                        Cell::Int(v) => v.to_string(),
                        Cell::Text(s) => serde_json::Value::from(s.as_str()).to_string(),
                    };
                    format!("{}: {v}", serde_json::Value::from(*k))
                })
                .collect();
            let sep = if i + 1 == self.rows.len() { "" } else { "," };
            writeln!(out, "  {{{}}}{sep}", fields.join(", "))?;
        }
        writeln!(out, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["t", "kind", "x"]);
        t.push(vec![0.1.into(), "a,b".into(), Cell::Empty]);
        t.push(vec![(-2.0).into(), "atom".into(), f64::NAN.into()]);
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write(&mut buf, Format::Csv).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,kind,x\n1.0000000000000001e-1,\"a,b\",\n-2.0000000000000000e0,atom,NaN\n"
        );
    }

    #[test]
    fn json_is_valid_and_mirrors_columns() {
        let mut buf = Vec::new();
        sample().write(&mut buf, Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["kind"], "a,b");
        assert_eq!(v[0]["t"], 0.1);
        assert!(v[1]["x"].is_null());
    }
}
