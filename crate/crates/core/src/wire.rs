//! Little-endian primitives shared by the embedding and checkpoint formats.

use crate::error::Error;
use crate::Result;
use std::io::Read;
use std::path::Path;

pub(crate) fn read_bytes(
    r: &mut impl Read,
    path: &Path,
    n: usize,
    what: &str,
) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::TruncatedFile {
                path: path.to_path_buf(),
                detail: format!("short read while reading {what}"),
            }
        } else {
            Error::io(path, e)
        }
    })?;
    Ok(buf)
}

pub(crate) fn read_u16(r: &mut impl Read, path: &Path, what: &str) -> Result<u16> {
    let b = read_bytes(r, path, 2, what)?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

pub(crate) fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let b = read_bytes(r, path, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub(crate) fn read_u64(r: &mut impl Read, path: &Path, what: &str) -> Result<u64> {
    let b = read_bytes(r, path, 8, what)?;
    Ok(u64::from_le_bytes([
        b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
    ]))
}

pub(crate) fn read_string(r: &mut impl Read, path: &Path, what: &str) -> Result<String> {
    let len = read_u16(r, path, what)? as usize;
    let bytes = read_bytes(r, path, len, what)?;
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("{what}: invalid UTF-8 ({e})"),
    })
}

pub(crate) fn read_f32s(r: &mut impl Read, path: &Path, n: usize, what: &str) -> Result<Vec<f32>> {
    let bytes = read_bytes(r, path, n.checked_mul(4).expect("size fits usize"), what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_string(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::InvalidConfig(format!(
        "string too long for format ({} bytes, max 65535): {:?}...",
        s.len(),
        &s[..s.len().min(32)]
    )))?;
    put_u16(buf, len);
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

pub(crate) fn put_f32s(buf: &mut Vec<u8>, data: &[f32]) {
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}
