use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Output directory; remembers what was written for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Locale-independent shortest round-trip representation.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn store(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        fs::write(self.dir.join(name), &bytes)?;
        self.written.push(OutputFile {
            file: name.into(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        self.store(name, bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.store(name, bytes)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.written
    }
}

/// Header with one column per ion: `{prefix}_ion1`, ...
pub fn ion_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}_ion{k}")).collect()
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}
