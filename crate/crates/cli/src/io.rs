//! File IO helpers: atomic writes and JSON Lines.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use yearguessr_core::{Error, Result};

pub fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Write through a temporary file in the target directory, then rename.
/// An interrupted run leaves the previous file intact.
pub fn write_atomic_with(path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::Builder::new()
        .prefix(".yearguessr-")
        .tempfile_in(dir)
        .map_err(|e| io_err(path, e))?;
    f(tmp.path())?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |tmp| {
        std::fs::write(tmp, bytes).map_err(|e| io_err(tmp, e))
    })
}

/// One JSON document per line. Blank lines are skipped; parse errors carry
/// the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn jsonl_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for row in rows {
        let line = serde_json::to_string(row)
            .map_err(|e| Error::InvalidConfig(format!("serialization: {e}")))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// Worker count: the flag wins, then YEARGUESSR_THREADS, then 0 (automatic).
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("YEARGUESSR_THREADS") {
        Ok(s) => s.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("YEARGUESSR_THREADS must be an integer, got {s:?}"))
        }),
        Err(_) => Ok(0),
    }
}
