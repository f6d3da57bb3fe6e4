//! CSV table emission: `#`-prefixed header echoing the resolved
//! configuration, a column-name line, then one row per grid point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

pub struct Table {
    header: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(command: &str, echo: &str, columns: Vec<&'static str>) -> Self {
        Self {
            header: vec![format!("sqdistill {command}"), echo.to_string()],
            columns,
            rows: Vec::new(),
        }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.header.push(line.into());
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        match out {
            Some(path) => {
                let file = File::create(path)?;
                self.emit(BufWriter::new(file))
            }
            None => {
                let stdout = std::io::stdout();
                self.emit(stdout.lock())
            }
        }
    }

    fn emit<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        for line in &self.header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}
