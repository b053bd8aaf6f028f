use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self { tool: "jetdesign", version: VERSION, command: command.into(), seed: cfg.seed(), config_hash: cfg.hash() }
    }

    pub fn comment(&self) -> String {
        format!("jetdesign {} command={} seed={} config={}", self.version, self.command, self.seed, self.config_hash)
    }
}

pub struct OutDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl OutDir {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        let f = File::create(&p).with_context(|| format!("cannot write {}", p.display()))?;
        Ok(BufWriter::new(f))
    }

    /// CSV with a `#` comment header line.
    pub fn csv(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<PathBuf> {
        let mut w = self.open(name)?;
        writeln!(w, "# {}", self.manifest.comment())?;
        body(&mut w)?;
        w.flush()?;
        Ok(self.path(name))
    }

    /// JSON-lines whose first line is `{"manifest": ...}`.
    pub fn jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let mut w = self.jsonl_writer(name)?;
        for r in rows {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    pub fn jsonl_writer(&self, name: &str) -> Result<BufWriter<File>> {
        let mut w = self.open(name)?;
        serde_json::to_writer(&mut w, &serde_json::json!({ "manifest": self.manifest }))?;
        writeln!(w)?;
        Ok(w)
    }

    /// Pretty JSON object with the manifest as its first key.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let mut value = serde_json::json!({ "manifest": self.manifest });
        if let serde_json::Value::Object(extra) = serde_json::to_value(body)? {
            value.as_object_mut().expect("object").extend(extra);
        }
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, &value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(self.path(name))
    }

    /// Text file with the manifest in the first comment, placed after any
    /// XML declaration.
    pub fn urdf(&self, path: &Path, text: &str) -> Result<PathBuf> {
        let comment = format!("<!-- {} -->\n", self.manifest.comment());
        let out = match text.split_once('\n') {
            Some((decl, rest)) if decl.starts_with("<?xml") => format!("{decl}\n{comment}{rest}"),
            _ => format!("{comment}{text}"),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path.to_path_buf())
    }
}

/// JSON-lines rows, skipping the manifest line.
pub fn read_jsonl_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with("{\"manifest\""))
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} row {}", path.display(), i + 1)))
        .collect()
}
