//! CSV tables, run manifests and the sweep index.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunKind;
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The first line of every CSV file; it is the only line that may differ
/// between builds for identical inputs.
pub fn version_line() -> String {
    format!("# ysl {VERSION}")
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the version line, a header row and the records.
pub fn write_table<W: Write>(
    mut w: W,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    writeln!(w, "{}", version_line())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(&r)?;
    }
    out.flush()
}

pub fn write_table_file(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_table(std::io::BufWriter::new(file), &header, rows).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: RunKind,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<OutputFile>,
    /// Hash over the canonical configuration and every output body.
    pub content_hash: String,
    pub summary: serde_json::Value,
}

impl Manifest {
    /// Hashes the listed files in `dir` and writes `dir/manifest.json`.
    pub fn write(
        dir: &Path,
        kind: RunKind,
        config: serde_json::Value,
        seed: Option<u64>,
        files: &[&str],
        summary: serde_json::Value,
    ) -> Result<Self> {
        let mut whole = Sha256::new();
        whole.update(serde_json::to_vec(&config)?);
        let mut outputs = Vec::with_capacity(files.len());
        for f in files {
            let path = dir.join(f);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let body = strip_version_line(&bytes);
            whole.update(body);
            outputs.push(OutputFile {
                file: f.to_string(),
                sha256: sha256_hex(body),
            });
        }
        let content_hash = whole.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let m = Manifest {
            kind,
            version: VERSION.to_string(),
            config,
            seed,
            outputs,
            content_hash,
            summary,
        };
        write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&m)?)?;
        Ok(m)
    }
}

fn strip_version_line(bytes: &[u8]) -> &[u8] {
    if bytes.starts_with(b"# ysl ") {
        match bytes.iter().position(|&b| b == b'\n') {
            Some(i) => &bytes[i + 1..],
            None => &[],
        }
    } else {
        bytes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub run: usize,
    pub dir: PathBuf,
    pub status: String,
    pub content_hash: Option<String>,
}

/// Append-only list of finished runs, rewritten atomically on each append.
#[derive(Debug)]
pub struct SweepIndex {
    path: PathBuf,
    entries: std::sync::Mutex<Vec<IndexEntry>>,
}

impl SweepIndex {
    pub fn create(path: PathBuf) -> Result<Self> {
        let idx = Self {
            path,
            entries: Default::default(),
        };
        idx.flush(&[])?;
        Ok(idx)
    }

    pub fn append(&self, entry: IndexEntry) -> Result<()> {
        let mut guard = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        guard.push(entry);
        guard.sort_by_key(|e| e.run);
        self.flush(&guard)
    }

    fn flush(&self, entries: &[IndexEntry]) -> Result<()> {
        write_atomic(&self.path, &serde_json::to_vec_pretty(entries)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_has_version_then_header() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["a".into(), "b c".into()], [vec!["1".into(), "x,y".into()]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], version_line());
        assert_eq!(lines[1], "a,b c");
        assert_eq!(lines[2], "1,\"x,y\"");
    }

    #[test]
    fn hash_ignores_version_line() {
        assert_eq!(strip_version_line(b"# ysl 9.9\nbody"), b"body");
        assert_eq!(strip_version_line(b"body"), b"body");
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
