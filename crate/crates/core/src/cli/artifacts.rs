//! Output directory bookkeeping: every data file is hashed into the
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{csv_error, format_float};
use crate::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactRecord>,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) struct OutputDir {
    root: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes)?;
        self.push(name, bytes);
        Ok(())
    }

    /// Hashes a file that was written by someone else, e.g. a streamed
    /// trajectory.
    pub fn register(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.push(name, &bytes);
        Ok(())
    }

    fn push(&mut self, name: &str, bytes: &[u8]) {
        self.records.retain(|r| r.path != name);
        self.records.push(ArtifactRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    /// Matrix with the column coordinates in the header and the row
    /// coordinate in the first column.
    pub fn write_matrix(
        &mut self,
        name: &str,
        corner: &str,
        cols: &[f64],
        rows: &[f64],
        cell: impl Fn(usize, usize) -> String,
    ) -> Result<()> {
        let header: Vec<String> = std::iter::once(corner.to_string()).chain(cols.iter().map(|&c| format_float(c))).collect();
        let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
        let body = rows.iter().enumerate().map(|(r, &y)| {
            std::iter::once(format_float(y))
                .chain((0..cols.len()).map(|c| cell(r, c)))
                .collect::<Vec<_>>()
        });
        self.write_csv(name, &header_ref, body)
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.records
    }
}

/// Float cell, empty when absent.
pub(crate) fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}
