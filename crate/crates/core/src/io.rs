//! JSON Lines I/O, atomic writes and content digests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Parses JSON Lines text; blank lines are skipped. Line numbers in errors
/// are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, IoError> {
    parse_jsonl_checked(text, path, |_: &T| Ok(()))
}

/// Like [`parse_jsonl`], additionally running `check` on each record so
/// semantic errors also carry a line number.
pub fn parse_jsonl_checked<T, F>(text: &str, path: &Path, check: F) -> Result<Vec<T>, IoError>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<(), String>,
{
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| IoError::Schema {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let item: T = serde_json::from_str(line).map_err(|e| schema(describe(&e)))?;
        check(&item).map_err(schema)?;
        out.push(item);
    }
    Ok(out)
}

// serde_json appends "at line 1 column N"; within a single JSONL line only
// the column is meaningful.
fn describe(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    let msg = match msg.rfind(" at line ") {
        Some(i) => &msg[..i],
        None => &msg,
    };
    format!("{msg} (column {})", e.column())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = read_to_string(path)?;
    parse_jsonl(&text, path)
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Fs {
        path: path.to_owned(),
        source,
    })
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Writes via a temporary file in the destination directory followed by a
/// rename, so the destination never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let fs_err = |source| IoError::Fs {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(fs_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fs_err)?;
    tmp.write_all(bytes).map_err(fs_err)?;
    tmp.as_file().sync_all().map_err(fs_err)?;
    tmp.persist(path).map_err(|e| fs_err(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Fs {
        path: path.to_owned(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}
