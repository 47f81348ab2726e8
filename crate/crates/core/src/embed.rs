//! Embedding matrices and their on-disk format.
//!
//! File layout, all little-endian:
//!
//! ```text
//! magic    4 bytes  "YGEM"
//! version  u32      currently 1
//! dim      u32
//! count    u64
//! ids      count x (len u16, UTF-8 bytes)
//! data     count * dim f32, row-major
//! ```
//!
//! Values are stored in 32 bits; computation happens at whatever precision the
//! caller requests via [`EmbeddingMatrix::row_scalar`]. Non-finite values are
//! rejected on both read and write.

use crate::error::Error;
use crate::scalar::{norm, Scalar};
use crate::wire;
use crate::Result;
use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"YGEM";
pub const VERSION: u32 = 1;

/// Id-addressed matrix of row embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// `data` is row-major, `ids.len() * dim` long. Ids must be unique and
    /// every value finite.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch {
                context: "embedding matrix".into(),
                expected: "dim > 0".into(),
                got: "dim = 0".into(),
            });
        }
        if data.len() != ids.len() * dim {
            return Err(Error::ShapeMismatch {
                context: "embedding matrix".into(),
                expected: format!("{} values ({} rows x {} dims)", ids.len() * dim, ids.len(), dim),
                got: format!("{}", data.len()),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId { id: id.clone() });
            }
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("row {:?}, component {}", ids[i / dim], i % dim),
                });
            }
        }
        Ok(EmbeddingMatrix {
            ids,
            index,
            dim,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index_of(id).map(|i| self.row(i))
    }

    /// Row widened to the requested scalar type.
    pub fn row_scalar<T: Scalar>(&self, i: usize) -> Vec<T> {
        self.row(i)
            .iter()
            .map(|v| T::from_f64_lossy(f64::from(*v)))
            .collect()
    }
}

/// Serialize a matrix to the binary format described in the module docs.
pub fn write_embeddings(path: &Path, m: &EmbeddingMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + m.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    wire::put_u32(&mut buf, VERSION);
    wire::put_u32(
        &mut buf,
        u32::try_from(m.dim).map_err(|_| Error::ShapeMismatch {
            context: "embedding file".into(),
            expected: "dim < 2^32".into(),
            got: format!("{}", m.dim),
        })?,
    );
    wire::put_u64(&mut buf, m.ids.len() as u64);
    for id in &m.ids {
        wire::put_string(&mut buf, id)?;
    }
    wire::put_f32s(&mut buf, &m.data);
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Deserialize a matrix, validating magic, version, declared sizes, and
/// finiteness of every value.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let magic = wire::read_bytes(&mut r, path, 4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "YGEM",
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
    let dim = wire::read_u32(&mut r, path, "dim")? as usize;
    let count = wire::read_u64(&mut r, path, "count")? as usize;
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        ids.push(wire::read_string(&mut r, path, &format!("id {i}"))?);
    }
    let data = wire::read_f32s(&mut r, path, count * dim, "embedding data")?;
    EmbeddingMatrix::new(ids, dim, data).map_err(|e| match e {
        // A file that parses but carries NaN/Inf is reported as a value error
        // with the file path attached for context.
        Error::NonFiniteValue { context } => Error::NonFiniteValue {
            context: format!("{}: {}", path.display(), context),
        },
        other => other,
    })
}

/// Scale a vector to unit Euclidean norm.
pub fn l2_normalize<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    for x in v {
        if !x.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "l2_normalize input".into(),
            });
        }
    }
    let n = norm(v);
    if n == T::zero() {
        return Err(Error::ZeroVector {
            context: "l2_normalize".into(),
        });
    }
    Ok(v.iter().map(|x| *x / n).collect())
}

/// Read embeddings from CSV: first column id, remaining columns the vector.
/// Every row must have the same width.
pub fn read_csv_embeddings(path: &Path, has_header: bool) -> Result<EmbeddingMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true) // width is enforced below, with a line number
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
    let mut ids = Vec::new();
    let mut data: Vec<f32> = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, row) in reader.records().enumerate() {
        let lineno = i + 1 + usize::from(has_header);
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: e.to_string(),
        })?;
        if row.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("need id plus at least one value, got {} columns", row.len()),
            });
        }
        let row_dim = row.len() - 1;
        match dim {
            None => dim = Some(row_dim),
            Some(d) if d != row_dim => {
                return Err(Error::ShapeMismatch {
                    context: format!("{}:{}", path.display(), lineno),
                    expected: format!("{d} values"),
                    got: format!("{row_dim}"),
                });
            }
            _ => {}
        }
        ids.push(row[0].to_string());
        for j in 1..row.len() {
            let v: f32 = row[j].trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("column {j}: {e}"),
            })?;
            data.push(v);
        }
    }
    let dim = dim.ok_or_else(|| Error::Empty {
        context: format!("{}: no data rows", path.display()),
    })?;
    EmbeddingMatrix::new(ids, dim, data)
}
