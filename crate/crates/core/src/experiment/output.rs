// SPDX-License-Identifier: Apache-2.0

//! Output directory with provenance headers and a manifest index.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::io::sha256_file;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// JSON artifact wrapped with its provenance.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_sha256: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutputDir {
    root: PathBuf,
    config_hash: String,
    seed: u64,
    files: Vec<PathBuf>,
    notes: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, config_hash: String, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            config_hash,
            seed,
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn header_line(&self) -> String {
        format!("# config_sha256={} seed={}", self.config_hash, self.seed)
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn register(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(PathBuf::from(rel));
        Ok(path)
    }

    /// CSV writer whose first line is the provenance comment, followed by
    /// `columns`.
    pub fn csv(&mut self, rel: &str, columns: &[&str]) -> Result<csv::Writer<File>> {
        let path = self.register(rel)?;
        let mut f = File::create(path)?;
        writeln!(f, "{}", self.header_line())?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(columns).map_err(|e| Error::Format(e.to_string()))?;
        Ok(w)
    }

    /// Pretty JSON object with `config_sha256` and `seed` fields prepended.
    pub fn json<T: Serialize>(&mut self, rel: &str, body: &T) -> Result<()> {
        let path = self.register(rel)?;
        let stamped = Stamped {
            config_sha256: &self.config_hash,
            seed: self.seed,
            body,
        };
        std::fs::write(path, serde_json::to_string_pretty(&stamped)? + "\n")?;
        Ok(())
    }

    /// Writes `manifest.json` listing every artifact with its hash.
    pub fn finish(self, command: &str) -> Result<Manifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            files.push(ManifestEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(&self.root.join(rel))?,
            });
        }
        let manifest = Manifest {
            command: command.to_string(),
            config_sha256: self.config_hash,
            seed: self.seed,
            files,
            notes: self.notes,
        };
        std::fs::write(
            self.root.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(manifest)
    }
}

pub fn finish_csv(mut w: csv::Writer<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_carry_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), "abc".into(), 5).unwrap();
        let mut w = out.csv("x.csv", &["a", "b"]).unwrap();
        w.write_record(["1", "2"]).unwrap();
        finish_csv(w).unwrap();
        out.json("r.json", &serde_json::json!({"k": 1})).unwrap();
        let m = out.finish("test").unwrap();
        let text = std::fs::read_to_string(dir.path().join("x.csv")).unwrap();
        assert_eq!(text, "# config_sha256=abc seed=5\na,b\n1,2\n");
        let j: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(j["config_sha256"], "abc");
        assert_eq!(j["k"], 1);
        assert_eq!(m.files.len(), 2);
        assert!(dir.path().join("manifest.json").exists());
    }
}
