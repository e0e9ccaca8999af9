//! Report files: JSON documents, CSV tables, plot data and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::RunError;
use crate::spectral::SpectrumResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short content hash of a serializable value, used in file names.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hashable values serialize");
    sha256_hex(&bytes)[..16].to_string()
}

/// A tolerance named in the config and the value it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"max"`: pass when `value <= threshold`; `"min"`: when
    /// `value >= threshold`.
    pub bound: &'static str,
    pub passed: bool,
}

impl Gate {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            bound: "max",
            passed: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            bound: "min",
            passed: value >= threshold,
        }
    }
}

/// `series, x, y` rows for plotting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    pub rows: Vec<(String, f64, f64)>,
}

impl PlotData {
    pub fn push(&mut self, series: impl Into<String>, x: f64, y: f64) {
        self.rows.push((series.into(), x, y));
    }
}

#[derive(Debug, Serialize)]
struct SpectrumRow<'a> {
    formulation: &'a str,
    refinement_level: usize,
    h: f64,
    level_index: usize,
    eigenvalue: f64,
    residual: f64,
}

/// CSV of eigenvalues, one row per `(formulation, level, index)`.
pub fn spectra_csv(levels: &[Vec<SpectrumResult>]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (level, specs) in levels.iter().enumerate() {
        for s in specs {
            for (i, (e, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
                w.serialize(SpectrumRow {
                    formulation: s.formulation.name(),
                    refinement_level: level,
                    h: s.h,
                    level_index: i,
                    eigenvalue: *e,
                    residual: *r,
                })?;
            }
        }
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

pub fn plot_csv(data: &PlotData) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "x", "y"])?;
    for (s, x, y) in &data.rows {
        w.serialize((s, x, y))?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

/// Everything a command produces, before it is written.
#[derive(Debug, Default)]
pub struct Artifacts {
    /// `(stem, bytes)`; the stem gets the problem hash and an extension.
    pub files: Vec<(String, &'static str, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, stem: &str, ext: &'static str, bytes: Vec<u8>) {
        self.files.push((stem.to_string(), ext, bytes));
    }

    /// Write every file as `<stem>-<hash>.<ext>` under `dir`; returns the
    /// file names.
    pub fn write(&self, dir: &Path, hash: &str) -> Result<Vec<String>, RunError> {
        fs::create_dir_all(dir)?;
        let mut names = Vec::new();
        for (stem, ext, bytes) in &self.files {
            let name = format!("{stem}-{hash}.{ext}");
            fs::write(dir.join(&name), bytes)?;
            names.push(name);
        }
        Ok(names)
    }
}

/// The report document shared by all commands.
#[derive(Debug, Serialize)]
pub struct Document<'a, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub problem_hash: &'a str,
    pub seed: u64,
    pub passed: bool,
    pub gates: &'a [Gate],
    pub report: &'a R,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, RunError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "contact-duality")]
    pub crate_version: &'static str,
    pub schema: u32,
}

/// Run provenance; the only output that varies between identical runs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub problem_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub threads: Option<usize>,
    pub cache: Option<PathBuf>,
    pub wall_time_seconds: f64,
    pub exit_code: i32,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn versions() -> Versions {
        Versions {
            crate_version: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA_VERSION,
        }
    }
}
