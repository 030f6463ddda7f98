//! CSV tables: a schema comment, setting echoes, a header row and rows of
//! 17-significant-digit floats.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

fn fmt_cell(c: &Cell) -> String {
    match c {
        Cell::Float(v) => format!("{v:.16e}"),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

pub struct Table {
    pub schema: &'static str,
    pub header: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(schema: &'static str, header: String, columns: &[&'static str]) -> Self {
        Self {
            schema,
            header,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# schema: duffing-{}/v1", self.schema)?;
        w.write_all(self.header.as_bytes())?;
        let mut csv = ::csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(fmt_cell))?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                }
                let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                let mut w = BufWriter::new(f);
                self.write_to(&mut w)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                self.write_to(stdout.lock())?;
            }
        }
        Ok(())
    }
}
