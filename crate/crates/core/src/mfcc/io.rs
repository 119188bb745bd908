//! Feature dumps: one CSV per clip, and a compact binary matrix cache.
//!
//! Binary layout (little-endian): `u64 frames`, `u64 coeffs`, then
//! `frames * coeffs` `f64` values row by row.

use std::io::{Read, Write};

use crate::error::{KwsError, Result};

use super::{MfccConfig, MfccMatrix};

pub fn write_csv<W: Write>(matrix: &MfccMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..matrix.coeffs_per_frame).map(|c| format!("c{c}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in matrix.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| KwsError::io("<csv>", e))
}

pub fn write_binary<W: Write>(matrix: &MfccMatrix, mut out: W) -> Result<()> {
    let io = |e| KwsError::io("<mfcc cache>", e);
    out.write_all(&(matrix.frames as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(matrix.coeffs_per_frame as u64).to_le_bytes())
        .map_err(io)?;
    for v in &matrix.values {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

/// Reads a matrix written by [`write_binary`]. The config is not stored and must be supplied.
pub fn read_binary<R: Read>(mut input: R, config: MfccConfig) -> Result<MfccMatrix> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| KwsError::io("<mfcc cache>", e))?;
    if bytes.len() < 16 {
        return Err(KwsError::Parse("MFCC cache header truncated".into()));
    }
    let frames = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let coeffs = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = frames
        .checked_mul(coeffs)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| KwsError::Parse("MFCC cache dimensions overflow".into()))?;
    if bytes.len() - 16 != expected {
        return Err(KwsError::Parse(format!(
            "MFCC cache holds {} value bytes, header implies {expected}",
            bytes.len() - 16
        )));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(MfccMatrix {
        frames,
        coeffs_per_frame: coeffs,
        values,
        config,
    })
}

fn csv_err(e: csv::Error) -> KwsError {
    KwsError::Parse(format!("csv: {e}"))
}
