//! Flat little-endian tensor files: `f64` row-major for reals, one byte per
//! entry for 0/1 masks.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub fn write_f64(path: &Path, data: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = data.into_iter().flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_f64(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!("expected {} bytes, found {}", expected_len * 8, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    // `iter` walks in logical row-major order regardless of memory layout.
    write_f64(path, m.iter().copied())
}

pub fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let v = read_f64(path, rows * cols)?;
    Ok(Array2::from_shape_vec((rows, cols), v).expect("length checked"))
}

pub fn write_vector(path: &Path, v: &Array1<f64>) -> Result<()> {
    write_f64(path, v.iter().copied())
}

pub fn read_vector(path: &Path, len: usize) -> Result<Array1<f64>> {
    Ok(Array1::from(read_f64(path, len)?))
}

pub fn write_mask(path: &Path, m: &Array2<u8>) -> Result<()> {
    let bytes: Vec<u8> = m.iter().copied().collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path, rows: usize, cols: usize) -> Result<Array2<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != rows * cols || bytes.iter().any(|&b| b > 1) {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: "mask file has wrong length or non-binary entries".into(),
        });
    }
    Ok(Array2::from_shape_vec((rows, cols), bytes).expect("length checked"))
}
