//! Output directory bookkeeping: every data file is recorded with its
//! checksum, and the manifest is written after everything else succeeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub config: &'a serde_json::Value,
    pub config_sha256: String,
    pub files: &'a [FileEntry],
    pub error_bounds: &'a BTreeMap<String, f64>,
    pub verdicts: &'a [Verdict],
    pub passed: bool,
    pub wall_clock_secs: f64,
}

/// A CSV table: header row plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_num).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Four significant digits, for human-readable verdict details.
pub fn short(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files go under `root`; paths in the manifest are relative and use `/`.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    files: Vec<FileEntry>,
    pub error_bounds: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
}

impl Artifacts {
    /// Refuses a non-empty directory so that the manifest lists every file in it.
    pub fn create(root: &Path) -> CliResult<Self> {
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
            if entries.next().is_some() {
                return Err(CliError::config(format!(
                    "output directory {} is not empty",
                    root.display()
                )));
            }
        } else {
            fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        }
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), error_bounds: BTreeMap::new(), verdicts: Vec::new() })
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        if rel == MANIFEST {
            return Err(CliError::config(format!("{MANIFEST} is reserved")));
        }
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_table(&mut self, rel: &str, table: &Table) -> CliResult<()> {
        self.write_bytes(rel, table.render().as_bytes())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> CliResult<()> {
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::config(format!("cannot serialise {rel}: {e}")))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn bound(&mut self, key: impl Into<String>, value: f64) {
        self.error_bounds.insert(key.into(), value);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn finish(mut self, subcommand: &str, config: &serde_json::Value, secs: f64) -> CliResult<bool> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let canonical = serde_json::to_string(config).expect("JSON values always serialise");
        let passed = self.passed();
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            config_sha256: sha256_hex(canonical.as_bytes()),
            files: &self.files,
            error_bounds: &self.error_bounds,
            verdicts: &self.verdicts,
            passed,
            wall_clock_secs: secs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn tables_render_with_header_and_lf() {
        let mut t = Table::new(["x", "value"]);
        t.push_numbers([0.5, -1.25]);
        t.push_numbers([1e-20, 3.0]);
        assert_eq!(t.render(), "x,value\n0.5,-1.25\n1e-20,3\n");
    }

    #[test]
    fn manifest_lists_every_file_and_refuses_reuse() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("run");
        let mut a = Artifacts::create(&root).unwrap();
        a.write_text("b/inner.csv", "x\n1\n").unwrap();
        a.write_json("a.json", &serde_json::json!({"k": 1})).unwrap();
        a.verdict(Verdict::new("check", true, "ok"));
        assert!(a.finish("test", &serde_json::json!({"z": 1, "a": 2}), 0.0).unwrap());
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join(MANIFEST)).unwrap()).unwrap();
        let paths: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
        assert_eq!(paths, ["a.json", "b/inner.csv"]);
        assert_eq!(m["files"][1]["sha256"], sha256_hex(b"x\n1\n"));
        assert!(Artifacts::create(&root).is_err());
    }
}
