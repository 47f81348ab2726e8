//! Sectioned tensor container used for parameter checkpoints.
//!
//! Same conventions as the embedding format (little-endian, 32-bit values,
//! finiteness enforced), but rows are replaced by named shaped sections:
//!
//! ```text
//! magic    4 bytes  "YGCP"
//! version  u32      currently 1
//! count    u64      number of sections
//! section  name (len u16, UTF-8), rank u8, dims rank x u32, prod(dims) f32
//! ```

use crate::error::Error;
use crate::wire;
use crate::Result;
use std::io::{BufReader, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"YGCP";
pub const VERSION: u32 = 1;

/// One named tensor. `data.len()` equals the product of `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSection {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl TensorSection {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expect: usize = dims.iter().map(|d| *d as usize).product();
        if expect != data.len() {
            return Err(Error::ShapeMismatch {
                context: format!("tensor section {name:?}"),
                expected: format!("{expect} values for dims {dims:?}"),
                got: format!("{}", data.len()),
            });
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("tensor section {name:?}, flat index {i}"),
                });
            }
        }
        Ok(TensorSection { name, dims, data })
    }

    /// Convenience for 1-d sections.
    pub fn vector(name: impl Into<String>, data: Vec<f32>) -> Result<Self> {
        let dims = vec![data.len() as u32];
        TensorSection::new(name, dims, data)
    }
}

pub fn write_sections(path: &Path, sections: &[TensorSection]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    wire::put_u32(&mut buf, VERSION);
    wire::put_u64(&mut buf, sections.len() as u64);
    for s in sections {
        wire::put_string(&mut buf, &s.name)?;
        buf.push(u8::try_from(s.dims.len()).map_err(|_| Error::ShapeMismatch {
            context: format!("tensor section {:?}", s.name),
            expected: "rank <= 255".into(),
            got: format!("{}", s.dims.len()),
        })?);
        for d in &s.dims {
            wire::put_u32(&mut buf, *d);
        }
        wire::put_f32s(&mut buf, &s.data);
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_sections(path: &Path) -> Result<Vec<TensorSection>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let magic = wire::read_bytes(&mut r, path, 4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "YGCP",
        });
    }
    let version = wire::read_u32(&mut r, path, "version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let count = wire::read_u64(&mut r, path, "section count")? as usize;
    let mut sections = Vec::with_capacity(count);
    for i in 0..count {
        let name = wire::read_string(&mut r, path, &format!("section {i} name"))?;
        let rank = wire::read_bytes(&mut r, path, 1, &format!("section {name:?} rank"))?[0];
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(wire::read_u32(&mut r, path, &format!("section {name:?} dims"))?);
        }
        let n: usize = dims.iter().map(|d| *d as usize).product();
        let data = wire::read_f32s(&mut r, path, n, &format!("section {name:?} data"))?;
        let section = TensorSection::new(name, dims, data).map_err(|e| match e {
            Error::NonFiniteValue { context } => Error::NonFiniteValue {
                context: format!("{}: {}", path.display(), context),
            },
            other => other,
        })?;
        sections.push(section);
    }
    Ok(sections)
}

/// Find a section by name.
pub fn find<'a>(sections: &'a [TensorSection], name: &str) -> Result<&'a TensorSection> {
    sections
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownId {
            id: name.to_string(),
            context: "checkpoint section".into(),
        })
}
