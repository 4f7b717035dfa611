//! Result envelopes, CSV tables and atomic file writes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance shared by every file a run writes.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub subcommand: String,
    pub spec_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!("# leanexp {VERSION} spec_sha256={} seed={}", self.spec_sha256, self.seed)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub spec_sha256: String,
    pub seed: u64,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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
        v.map_or(Cell::Missing, Into::into)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 15 significant digits, shortest form; `NA` for missing or non-finite.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return "NA".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.14e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => "NA".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }

    fn to_bytes(&self, header: &str) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "{header}").expect("write to Vec");
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            context: "csv buffer".into(),
            source: e.into_error(),
        })
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io {
        context: "csv".into(),
        source: std::io::Error::other(e),
    }
}

/// What a subcommand produced: a JSON result and zero or more tables.
pub struct Output {
    pub json: serde_json::Value,
    pub tables: Vec<Table>,
}

impl Output {
    pub fn new<T: Serialize>(result: &T, tables: Vec<Table>) -> Self {
        Self {
            json: serde_json::to_value(result).expect("reports serialize"),
            tables,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let io = |context: String| move |source: std::io::Error| CliError::Io { context, source };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io(format!("creating a temporary file in {}", dir.display())))?;
    tmp.write_all(bytes).map_err(io(format!("writing {}", path.display())))?;
    tmp.as_file().sync_all().map_err(io(format!("syncing {}", path.display())))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        context: format!("renaming into {}", path.display()),
        source: e.error,
    })?;
    Ok(())
}

/// Writes the run's files and returns their paths in write order.
pub fn emit(out: &Output, prov: &Provenance, out_dir: &Path, stem: &str, format: Format) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        context: format!("creating {}", out_dir.display()),
        source,
    })?;
    let mut written = Vec::new();
    if matches!(format, Format::Json | Format::Both) {
        let env = Envelope {
            tool: "leanexp".into(),
            version: VERSION.into(),
            subcommand: prov.subcommand.clone(),
            spec_sha256: prov.spec_sha256.clone(),
            seed: prov.seed,
            result: &out.json,
        };
        let mut bytes = serde_json::to_vec_pretty(&env).expect("envelope serializes");
        bytes.push(b'\n');
        let path = out_dir.join(format!("{stem}.json"));
        write_atomic(&path, &bytes)?;
        written.push(path.display().to_string());
    }
    if matches!(format, Format::Csv | Format::Both) {
        for t in &out.tables {
            let path = out_dir.join(format!("{}.csv", t.name));
            write_atomic(&path, &t.to_bytes(&prov.header())?)?;
            written.push(path.display().to_string());
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_fifteen_digits() {
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333333");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(-1.5e-7), "-1.5e-7");
        assert_eq!(format_number(6.02214076e23), "6.02214076e23");
        assert_eq!(format_number(f64::INFINITY), "NA");
        assert_eq!(format_number(f64::NAN), "NA");
        assert_eq!(format_number(-0.0), "0");
    }

    #[test]
    fn csv_has_provenance_header() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1u64.into(), Cell::Missing]);
        let prov = Provenance {
            subcommand: "x".into(),
            spec_sha256: "ab".into(),
            seed: 7,
        };
        let s = String::from_utf8(t.to_bytes(&prov.header()).unwrap()).unwrap();
        assert_eq!(s, format!("# leanexp {VERSION} spec_sha256=ab seed=7\na,b\n1,NA\n"));
    }
}
