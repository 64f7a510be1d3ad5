//! Content-addressed stage ledger.
//!
//! Each scope (one day's interim directory, or the dataset directory)
//! carries a `.ledger.json` recording, per stage, a digest of its inputs
//! and parameters plus the hash of every output it wrote. A stage is
//! fresh iff the input digest matches and all recorded outputs still
//! hash the same — so edits *and* corruption both trigger reruns.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flowforge_core::table::{write_parquet, Table};
use flowforge_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const LEDGER_FILE: &str = ".ledger.json";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub stages: BTreeMap<String, LedgerEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Digest of the stage name, parameters, and every input file.
    pub input_hash: String,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the data root.
    pub path: String,
    pub hash: String,
}

impl Ledger {
    /// A missing ledger is an empty one.
    pub fn load(path: &Path) -> Result<Ledger> {
        if !path.exists() {
            return Ok(Ledger::default());
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("serializing ledger: {e}")))?;
        atomic_write_bytes(path, text.as_bytes())
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut f = fs::File::open(path)?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Root-relative path string used in ledger records and digests.
pub fn rel(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned()
}

/// Digest of everything that determines a stage's output: its name, its
/// parameters, and each input's relative path and content hash.
pub fn hash_inputs(
    stage: &str,
    params: &[(String, String)],
    inputs: &[PathBuf],
    root: &Path,
) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    for (k, v) in params {
        h.update(k.as_bytes());
        h.update([b'=']);
        h.update(v.as_bytes());
        h.update([0]);
    }
    let mut named: Vec<(String, &PathBuf)> =
        inputs.iter().map(|p| (rel(root, p), p)).collect();
    named.sort();
    for (name, path) in named {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(hash_file(path)?.as_bytes());
        h.update([0]);
    }
    Ok(hex(&h.finalize()))
}

/// True iff every recorded output still exists with its recorded hash.
pub fn outputs_fresh(entry: &LedgerEntry, root: &Path) -> bool {
    entry.outputs.iter().all(|o| {
        let path = root.join(&o.path);
        path.exists() && hash_file(&path).map(|h| h == o.hash).unwrap_or(false)
    })
}

pub fn record_outputs(outputs: &[PathBuf], root: &Path) -> Result<Vec<OutputRecord>> {
    let mut records = vec![];
    for path in outputs {
        records.push(OutputRecord { path: rel(root, path), hash: hash_file(path)? });
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(records)
}

fn tmp_sibling(path: &Path) -> Result<PathBuf> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Contract(format!("bad output path {}", path.display())))?;
    Ok(path.with_file_name(format!(".tmp.{name}")))
}

pub fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = tmp_sibling(path)?;
    fs::write(&tmp, bytes).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn atomic_write_parquet(table: &Table, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = tmp_sibling(path)?;
    write_parquet(table, &tmp).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    fs::rename(&tmp, path)?;
    Ok(())
}
