use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Record of the invocation that produced an output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub problem: PathBuf,
    pub config: serde_json::Value,
    pub seed: u64,
    pub out: PathBuf,
    pub version: String,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
}

pub struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn target(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.target(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.target(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.target(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<()> {
        manifest.files = std::mem::take(&mut self.files);
        self.json("manifest.json", &manifest)
    }
}

/// Shortest round-trip decimal; `inf`/`NaN` stay readable.
pub fn num(v: f64) -> String {
    v.to_string()
}
