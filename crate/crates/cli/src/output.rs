use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use shortcut_lab::rng::SUBSTREAM_HASH;
use shortcut_lab::{Error, Result};

use crate::config::ExperimentConfig;

/// Output directory plus a record of every artifact written, for the manifest.
pub struct Outputs {
    pub dir: PathBuf,
    written: Vec<String>,
}

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Outputs { dir, written: Vec::new() })
    }

    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(header).map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| io(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Echoes the command, resolved configuration and artifacts. No timestamps, so
    /// reruns are byte-identical.
    pub fn manifest(&mut self, command: &str, cfg: &ExperimentConfig, threads: Option<usize>) -> Result<()> {
        let m = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg.values,
            "threads": threads,
            "substream_hash": SUBSTREAM_HASH,
            "outputs": self.written,
        });
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).map_err(|e| io(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io(&path, e))
    }
}

/// Shortest round-trip formatting, stable across runs.
pub fn f(x: f64) -> String {
    format!("{x}")
}
