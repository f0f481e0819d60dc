use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use ddsense::sequence::RNG_ALGORITHM;
use serde::Serialize;

use crate::config::{sha256_hex, ConfigText};
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Full-precision scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Serialize)]
pub struct ConfigRecord {
    pub path: String,
    pub sha256: String,
    pub effective_sha256: String,
    pub overrides: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub config: Option<ConfigRecord>,
    pub rng_algorithm: &'static str,
    pub seed: u64,
    pub started_utc: String,
    pub finished_utc: String,
    pub outputs: Vec<OutputFile>,
}

/// Collects the files of one run and writes them plus the manifest.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl Run {
    pub fn start(dir: &Path, command: &str, seed: u64, config: Option<(&Path, &ConfigText)>) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                tool_version: env!("CARGO_PKG_VERSION"),
                command: command.into(),
                config: config.map(|(p, c)| ConfigRecord {
                    path: p.display().to_string(),
                    sha256: c.file_sha256.clone(),
                    effective_sha256: c.effective_sha256.clone(),
                    overrides: c.overrides.clone(),
                }),
                rng_algorithm: RNG_ALGORITHM,
                seed,
                started_utc: now(),
                finished_utc: String::new(),
                outputs: Vec::new(),
            },
        })
    }

    /// Writes `name` with a header row and the given records.
    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::io(&path, std::io::Error::other(e.to_string()));
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
        std::fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(OutputFile {
            file: name.into(),
            sha256: sha256_hex(&bytes),
            rows: rows.len(),
        });
        Ok(path)
    }

    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.manifest.finished_utc = now();
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 0.0, 0.999999999999] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.0), "1e0");
    }
}
