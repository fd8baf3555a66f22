//! Run manifests and the output directory.
//!
//! A manifest records the command, every setting (defaults included), the
//! seed and the content hash of each input file. Its SHA-256 is stamped into
//! every report. Nothing time- or host-dependent goes in, so identical
//! manifests give identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use deconfounder::{Error, FitConfig, MiceConfig, MAX_CONDITION};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub role: &'static str,
    /// File name only, so the manifest does not depend on where data lives.
    pub file: String,
    pub sha256: String,
}

impl InputRecord {
    pub fn read(role: &'static str, path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|source| {
            CliError::stage("load")(Error::Io {
                path: path.display().to_string(),
                source,
            })
        })?;
        Ok(InputRecord {
            role,
            file: path
                .file_name()
                .map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned()),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Library settings that have no flag but still shape the results.
#[derive(Debug, Clone, Serialize)]
pub struct FixedSettings {
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub mice_convergence_tol: f64,
    pub significance_levels: [f64; 2],
    pub max_condition: f64,
}

impl Default for FixedSettings {
    fn default() -> Self {
        let fit = FitConfig::default();
        FixedSettings {
            em_max_iter: fit.max_iter,
            em_tol: fit.tol,
            mice_convergence_tol: MiceConfig::default().convergence_tol,
            significance_levels: [0.05, 0.10],
            max_condition: MAX_CONDITION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputRecord>,
    pub settings: C,
    pub fixed: FixedSettings,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &'static str, inputs: Vec<InputRecord>, settings: C) -> Self {
        Manifest {
            tool: "deconfounder",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            settings,
            fixed: FixedSettings::default(),
        }
    }
}

/// Output directory with the manifest already written.
pub struct OutputDir {
    pub path: PathBuf,
    pub manifest_sha256: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| {
        CliError::stage("output")(Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

impl OutputDir {
    pub fn create<C: Serialize>(path: &Path, manifest: &Manifest<C>) -> CliResult<Self> {
        fs::create_dir_all(path).map_err(io_err(path))?;
        let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        bytes.push(b'\n');
        let out = OutputDir {
            path: path.to_path_buf(),
            manifest_sha256: sha256_hex(&bytes),
        };
        out.write_bytes("manifest.json", &bytes)?;
        Ok(out)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.file(name);
        fs::write(&p, bytes).map_err(io_err(&p))
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }
}
