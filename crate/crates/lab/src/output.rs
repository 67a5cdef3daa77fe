//! Artifact encoding and atomic emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::LabError;

pub const MANIFEST: &str = "manifest.json";

/// Shortest string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, Default)]
pub struct RunArtifacts {
    pub files: Vec<Artifact>,
}

impl RunArtifacts {
    pub fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push(Artifact {
            name: name.into(),
            bytes,
        });
    }

    /// RFC-4180 table; numbers should already be formatted with [`fmt_f64`].
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), LabError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        self.push(name, csv_bytes(header, rows)?);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| LabError::Output(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.push(name, bytes);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, document: String) {
        self.push(name, document.into_bytes());
    }

    pub fn get(&self, name: &str) -> Option<&Artifact> {
        self.files.iter().find(|a| a.name == name)
    }

    pub fn extend(&mut self, prefix: &str, other: RunArtifacts) {
        for a in other.files {
            self.push(format!("{prefix}{}", a.name), a.bytes);
        }
    }
}

pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, LabError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let err = |e: csv::Error| LabError::Output(format!("csv encoding: {e}"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| LabError::Output(format!("csv encoding: {e}")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub versions: Versions,
    pub kind: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub lab: &'static str,
    pub core: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            lab: env!("CARGO_PKG_VERSION"),
            core: parabolic_core::VERSION,
        }
    }
}

fn check_name(name: &str) -> Result<(), LabError> {
    let ok = !name.is_empty()
        && name != MANIFEST
        && !name.starts_with("manifest.")
        && name.split('/').all(|part| !part.is_empty() && part != "." && part != "..")
        && !name.contains('\\');
    if ok {
        Ok(())
    } else {
        Err(LabError::Output(format!("invalid artifact name {name:?}")))
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, LabError> {
    let target = dir.join(name);
    let parent = target.parent().unwrap_or(dir).to_path_buf();
    fs::create_dir_all(&parent).map_err(|e| LabError::io(&parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(|e| LabError::io(&parent, e))?;
    tmp.write_all(bytes).map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.persist(&target).map_err(|e| LabError::io(&target, e.error))?;
    Ok(target)
}

/// Moves an existing manifest to `manifest.<k>.json` with the first free `k`.
fn archive_manifest(dir: &Path) -> Result<Option<PathBuf>, LabError> {
    let current = dir.join(MANIFEST);
    if !current.exists() {
        return Ok(None);
    }
    let mut k = 1u32;
    let archived = loop {
        let candidate = dir.join(format!("manifest.{k}.json"));
        if !candidate.exists() {
            break candidate;
        }
        k += 1;
    };
    fs::rename(&current, &archived).map_err(|e| LabError::io(&current, e))?;
    Ok(Some(archived))
}

/// Writes every artifact atomically, then the manifest. Data files written
/// by a failed emission are removed again.
pub fn emit_outputs(
    artifacts: &RunArtifacts,
    dir: &Path,
    kind: &str,
    seed: u64,
    config: serde_json::Value,
) -> Result<PathBuf, LabError> {
    for a in &artifacts.files {
        check_name(&a.name)?;
    }
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for a in &artifacts.files {
        match write_atomic(dir, &a.name, &a.bytes) {
            Ok(path) => written.push(path),
            Err(e) => {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
        }
        entries.push(FileEntry {
            path: a.name.clone(),
            sha256: sha256_hex(&a.bytes),
            bytes: a.bytes.len(),
        });
    }
    let manifest = Manifest {
        tool: "parabolic-lab",
        versions: Versions::current(),
        kind: kind.to_string(),
        seed,
        config,
        files: entries,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| LabError::Output(e.to_string()))?;
    bytes.push(b'\n');
    archive_manifest(dir)?;
    write_atomic(dir, MANIFEST, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.43233235838169365, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn csv_quotes_and_terminates() {
        let b = csv_bytes(&["a", "b"], [vec!["1".to_string(), "x,y".to_string()]]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "a,b\r\n1,\"x,y\"\r\n");
    }

    #[test]
    fn emission_hashes_and_archives() {
        let dir = tempfile::tempdir().unwrap();
        let empty = emit_outputs(&RunArtifacts::default(), dir.path(), "solve", 0, serde_json::Value::Null).unwrap();
        let m: serde_json::Value = serde_json::from_slice(&fs::read(&empty).unwrap()).unwrap();
        assert_eq!(m["files"].as_array().unwrap().len(), 0);

        let mut arts = RunArtifacts::default();
        arts.push("data/x.csv", b"t\r\n0\r\n".to_vec());
        emit_outputs(&arts, dir.path(), "solve", 0, serde_json::Value::Null).unwrap();
        assert!(dir.path().join("manifest.1.json").exists());
        let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        let entry = &m["files"][0];
        let on_disk = fs::read(dir.path().join("data/x.csv")).unwrap();
        assert_eq!(entry["sha256"].as_str().unwrap(), sha256_hex(&on_disk));

        emit_outputs(&arts, dir.path(), "solve", 0, serde_json::Value::Null).unwrap();
        assert!(dir.path().join("manifest.2.json").exists());
    }

    #[test]
    fn rejects_escaping_names() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["../x", "/abs", "manifest.json", "a//b"] {
            let mut arts = RunArtifacts::default();
            arts.push(bad, vec![]);
            assert!(emit_outputs(&arts, dir.path(), "solve", 0, serde_json::Value::Null).is_err(), "{bad}");
        }
    }
}
