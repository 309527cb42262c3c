// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Result files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lindloc::linalg::CMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Density-matrix CSV with one row per entry.
    pub fn matrix_csv(&mut self, name: &str, m: &CMatrix) -> Result<()> {
        let rows = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| MatrixRow { row_site: i, col_site: j, re: m[(i, j)].re, im: m[(i, j)].im });
        self.csv(name, rows)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[derive(Serialize)]
struct MatrixRow {
    row_site: usize,
    col_site: usize,
    re: f64,
    im: f64,
}

/// Companion table of `ln` magnitudes against distance for plotting.
#[derive(Serialize)]
pub struct PlotRow {
    pub series: String,
    pub distance: usize,
    pub log_magnitude: f64,
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub duration_ms: u128,
    pub versions: Versions,
    pub status: &'a str,
    pub files: &'a [String],
}

#[derive(Serialize)]
pub struct Versions {
    pub lindloc: &'static str,
    #[serde(rename = "lindloc-cli")]
    pub cli: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions { lindloc: lindloc::VERSION, cli: env!("CARGO_PKG_VERSION") }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
