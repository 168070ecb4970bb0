//! CSV output with `#`-prefixed provenance lines ahead of the header.

use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File name inside the output directory.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

pub fn render(table: &Table, meta: &Metadata) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(
        format!(
            "# dualgate {}\n# command: {}\n# config_sha256: {}\n# seed: {}\n",
            env!("CARGO_PKG_VERSION"),
            meta.command,
            meta.config_hash,
            meta.seed
        )
        .as_bytes(),
    );
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(&table.header).map_err(csv_error)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn write(dir: &Path, table: &Table, meta: &Metadata) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(&table.name);
    std::fs::write(&path, render(table, meta)?)?;
    Ok(path)
}

fn csv_error(err: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(err))
}
