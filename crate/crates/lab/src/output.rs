//! Run directories, manifests and number formatting.
//!
//! Every float leaves the program with 17 significant digits, so files are
//! exact round-trips of the computed values and byte-identical across
//! reruns of the same manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};

use crate::config::Resolved;

/// `{:.16e}`, or `NaN`/`inf`/`-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON formatter writing floats with 17 significant digits.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut compact = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut compact, Digits17);
    value.serialize(&mut ser)?;
    let mut out = String::from_utf8(compact)?;
    out.push('\n');
    Ok(out)
}

/// Plain CSV table; every cell is preformatted.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Part of the manifest that determines the outputs; hashed for the
/// directory name.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestKey<'a> {
    pub subcommand: &'a str,
    pub config: &'a Resolved,
    pub seed: u64,
    pub tool_version: &'a str,
}

#[derive(Debug, Serialize)]
struct WallTime {
    started_unix_seconds: f64,
    elapsed_seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    key: ManifestKey<'a>,
    output_dir: String,
    files: &'a [String],
    wall_time: WallTime,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Directory `<out>/<subcommand>/<hash>` of one run.
pub struct RunDir {
    pub path: PathBuf,
    pub hash: String,
    subcommand: String,
    config: Resolved,
    files: Vec<String>,
    started: SystemTime,
    clock: Instant,
}

pub fn manifest_hash(key: &ManifestKey) -> Result<String> {
    let digest = Sha256::digest(to_json(key)?.as_bytes());
    Ok(hex::encode(&digest[..8]))
}

impl RunDir {
    pub fn create(out: &Path, subcommand: &str, config: &Resolved) -> Result<Self> {
        let key = ManifestKey { subcommand, config, seed: config.seed, tool_version: TOOL_VERSION };
        let hash = manifest_hash(&key)?;
        let path = out.join(subcommand).join(&hash);
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir {
            path,
            hash,
            subcommand: subcommand.to_string(),
            config: config.clone(),
            files: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path.join(name);
        fs::write(&path, to_json(value)?).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        table.write(&self.path.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json`; a successful run also becomes
    /// `<out>/<subcommand>/latest`.
    pub fn finish(self, success: bool) -> Result<PathBuf> {
        let key = ManifestKey {
            subcommand: &self.subcommand,
            config: &self.config,
            seed: self.config.seed,
            tool_version: TOOL_VERSION,
        };
        let manifest = Manifest {
            key,
            output_dir: self.path.display().to_string(),
            files: &self.files,
            wall_time: WallTime {
                started_unix_seconds: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
                elapsed_seconds: self.clock.elapsed().as_secs_f64(),
            },
        };
        fs::write(self.path.join("manifest.json"), to_json(&manifest)?)?;
        if success {
            let parent = self.path.parent().context("run directory has no parent")?;
            fs::write(parent.join("latest"), format!("{}\n", self.hash))?;
        }
        Ok(self.path)
    }
}

/// Directory named by `<out>/<subcommand>/latest`, if any.
pub fn latest(out: &Path, subcommand: &str) -> Option<PathBuf> {
    let base = out.join(subcommand);
    let name = fs::read_to_string(base.join("latest")).ok()?;
    let dir = base.join(name.trim());
    dir.is_dir().then_some(dir)
}
