//! DLMX matrix container.
//!
//! Layout: 4-byte magic `DLMX`, then `rows`, `cols` and a reserved zero word
//! as little-endian `u32`, followed by `rows * cols` little-endian IEEE-754
//! `f32` values in row-major order.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::matrix::{Matrix, ShapeError};

pub const MAGIC: &[u8; 4] = b"DLMX";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("truncated header: {0} bytes, need at least 16")]
    Truncated(usize),
    #[error("bad magic {0:?}, expected \"DLMX\"")]
    BadMagic([u8; 4]),
    #[error("declared {rows}x{cols} needs {expected} payload bytes, found {found}")]
    SizeMismatch { rows: u32, cols: u32, expected: usize, found: usize },
    #[error("reserved header word must be 0, found {0}")]
    Reserved(u32),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn word(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn read_matrix(bytes: &[u8]) -> Result<Matrix<f32>, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated(bytes.len()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if &magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let (rows, cols, reserved) = (word(bytes, 4), word(bytes, 8), word(bytes, 12));
    if reserved != 0 {
        return Err(CodecError::Reserved(reserved));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows as usize * cols as usize * 4;
    if payload.len() != expected {
        return Err(CodecError::SizeMismatch { rows, cols, expected, found: payload.len() });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok(Matrix::from_vec(rows as usize, cols as usize, data)?)
}

pub fn write_matrix(m: &Matrix<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_matrix_file(path: &Path) -> Result<Matrix<f32>, CodecError> {
    let bytes = fs::read(path).map_err(|source| CodecError::Io { path: path.display().to_string(), source })?;
    read_matrix(&bytes)
}

pub fn write_matrix_file(path: &Path, m: &Matrix<f32>) -> Result<(), CodecError> {
    fs::write(path, write_matrix(m)).map_err(|source| CodecError::Io { path: path.display().to_string(), source })
}
