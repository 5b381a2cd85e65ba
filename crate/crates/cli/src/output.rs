//! Artifact files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dphase_core::mesh::NodalField;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Round-trip float format: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Writes into one directory and records every file.
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub timings: Vec<Timing>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new(), timings: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            name: name.into(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    /// CSV with a header row; every cell is already formatted.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.write(name, &bytes)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// `(x, y, value)` rows in node order.
    pub fn write_field(&mut self, name: &str, field: &NodalField) -> std::io::Result<()> {
        let rows = field.mesh().nodes().iter().zip(field.values()).map(|(x, v)| vec![num(x.x), num(x.y), num(*v)]);
        self.write_csv(name, &["x", "y", "value"], rows)
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    /// `manifest.json` is written last and does not list itself.
    pub fn finish(self, config: &impl Serialize, status: &str, error: Option<Value>) -> std::io::Result<()> {
        let manifest = json!({
            "status": status,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "timings": self.timings,
            "files": self.files,
            "error": error,
        });
        let mut s = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        s.push('\n');
        fs::write(self.dir.join("manifest.json"), s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn files_are_hashed() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path()).unwrap();
        a.write("x.txt", b"abc").unwrap();
        assert_eq!(a.files[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
