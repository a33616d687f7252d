//! Binary matrix dump format.
//!
//! A 16-byte header (`b"COVM"`, little-endian `u32` dimension, two reserved
//! `u32` words set to zero) followed by the `n * n` entries as little-endian
//! `f64` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CovError, Result};

pub const MAGIC: &[u8; 4] = b"COVM";

pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(CovError::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let n = u32::try_from(m.nrows())
        .map_err(|_| CovError::Overflow("matrix dimension exceeds u32".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&[0u8; 8])?;
    let mut buf = Vec::with_capacity(m.len() * 8);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(CovError::Parse("missing COVM magic".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().expect("4-byte slice")) as usize;
    let mut data = vec![0u8; n * n * 8];
    input.read_exact(&mut data)?;
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(DMatrix::from_row_slice(n, n, &values))
}

pub fn save_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Reads a whitespace-separated square matrix, one row per line; `#` starts a comment.
pub fn parse_text_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| CovError::Parse(format!("{t:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CovError::Parse(
            "text matrix must be square and non-empty".into(),
        ));
    }
    Ok(DMatrix::from_row_slice(n, n, &rows.concat()))
}
