//! Dense matrix files.
//!
//! Binary layout: the magic bytes `DMAT`, then `rows` and `cols` as
//! little-endian `u64`, then `rows * cols` little-endian `f64` in row-major
//! order. The CSV layout is a `rows,cols` header line followed by one line
//! per row.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::DenseMatrix;

pub const DMAT_MAGIC: &[u8; 4] = b"DMAT";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes {found:?}, expected \"DMAT\"")]
    BadMagic { found: Vec<u8> },
    #[error("truncated file at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("{extra} trailing bytes after matrix data at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: String, expected: String },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("inconsistent contents: {0}")]
    Inconsistent(String),
}

pub fn encode_dmat(m: &DenseMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(20 + 8 * m.as_slice().len());
    buf.extend_from_slice(DMAT_MAGIC);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_dmat(bytes: &[u8]) -> Result<DenseMatrix, FormatError> {
    let take = |offset: usize, len: usize| -> Result<&[u8], FormatError> {
        bytes
            .get(offset..offset + len)
            .ok_or_else(|| FormatError::Truncated {
                offset: bytes.len(),
                needed: offset + len - bytes.len(),
            })
    };
    let magic = take(0, 4)?;
    if magic != DMAT_MAGIC {
        return Err(FormatError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let rows = u64::from_le_bytes(take(4, 8)?.try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(take(12, 8)?.try_into().expect("8 bytes")) as usize;
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| FormatError::Inconsistent(format!("absurd shape {rows}x{cols}")))?;
    let body = take(20, count)?;
    if bytes.len() > 20 + count {
        return Err(FormatError::TrailingBytes {
            offset: 20 + count,
            extra: bytes.len() - 20 - count,
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        data.push(v);
    }
    Ok(DenseMatrix::from_vec(rows, cols, data).expect("length checked"))
}

pub fn write_dmat(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<(), FormatError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_dmat(m))?;
    Ok(())
}

pub fn read_dmat(path: impl AsRef<Path>) -> Result<DenseMatrix, FormatError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dmat(&bytes)
}

/// CSV text with shortest round-trip float formatting.
pub fn encode_csv(m: &DenseMatrix) -> String {
    let mut s = format!("{},{}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn decode_csv(text: &str) -> Result<DenseMatrix, FormatError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(FormatError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|e| FormatError::Parse {
            line: 1,
            msg: format!("bad dimension {s:?}: {e}"),
        })
    };
    if dims.len() != 2 {
        return Err(FormatError::Parse {
            line: 1,
            msg: "header must be `rows,cols`".into(),
        });
    }
    let rows = parse_dim(dims[0])?;
    let cols = parse_dim(dims[1])?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| FormatError::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if vals.len() != cols {
            return Err(FormatError::Parse {
                line: idx + 1,
                msg: format!("expected {cols} values, found {}", vals.len()),
            });
        }
        data.extend(vals);
        seen += 1;
    }
    if seen != rows {
        return Err(FormatError::Parse {
            line: seen + 2,
            msg: format!("expected {rows} rows, found {seen}"),
        });
    }
    Ok(DenseMatrix::from_vec(rows, cols, data).expect("length checked"))
}

pub fn write_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<(), FormatError> {
    fs::write(path, encode_csv(m))?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<DenseMatrix, FormatError> {
    decode_csv(&fs::read_to_string(path)?)
}
