//! Bit-exact binary file formats for field dumps and stencil caches.
//!
//! Both formats share the same framing:
//!
//! ```text
//! bytes 0..4    magic              (`FRLP` fields, `FRST` stencils)
//! bytes 4..8    format version     (u32, little-endian)
//! bytes 8..12   header length      (u32, little-endian)
//! bytes 12..    UTF-8 JSON header
//! then          payload            (IEEE-754 binary64, little-endian)
//! ```
//!
//! Field payloads are the interior node values in x-fastest order; stencil
//! payloads are the coefficient table with the first index fastest, i.e. the
//! in-memory layout `m + (N+1)(n + (N+1)s)`.  All floating-point header
//! fields survive the JSON round trip exactly (shortest-representation
//! encoding), so a write/read cycle reproduces every struct bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridError, GridSpec};
use crate::stencil::{FracParams, Stencil, StencilError};

pub const FIELD_MAGIC: [u8; 4] = *b"FRLP";
pub const STENCIL_MAGIC: [u8; 4] = *b"FRST";
pub const FIELD_VERSION: u32 = 1;
pub const STENCIL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    /// Wrong leading magic bytes — the file is not of the requested kind.
    #[error("bad magic: expected {:?}, found {:?}", String::from_utf8_lossy(expected), String::from_utf8_lossy(found))]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("header decode failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Stencil(#[from] StencilError),
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    bounds: Vec<(f64, f64)>,
    h: f64,
    /// Interior node counts per axis.
    shape: Vec<usize>,
    ordering: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct StencilHeader {
    d: usize,
    alpha: f64,
    gamma: f64,
    n: usize,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
    c_norm: f64,
    tail: f64,
}

fn write_framed(path: &Path, magic: &[u8; 4], version: u32, header: &[u8], payload: &[f64]) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(magic)?;
    w.write_all(&version.to_le_bytes())?;
    let hlen = u32::try_from(header.len()).map_err(|_| IoError::Corrupt("header too large".into()))?;
    w.write_all(&hlen.to_le_bytes())?;
    w.write_all(header)?;
    for v in payload {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Parse framing, returning (header bytes, reader positioned at the payload).
fn read_framed(path: &Path, magic: &[u8; 4], max_version: u32) -> Result<(Vec<u8>, BufReader<File>), IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if found != *magic {
        return Err(IoError::BadMagic { expected: *magic, found });
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version == 0 || version > max_version {
        return Err(IoError::UnsupportedVersion(version));
    }
    r.read_exact(&mut word)?;
    let hlen = u32::from_le_bytes(word) as usize;
    let mut header = vec![0u8; hlen];
    r.read_exact(&mut header)?;
    Ok((header, r))
}

/// Read exactly `len` binary64 values and require the reader to end there.
fn read_payload(r: &mut BufReader<File>, len: usize) -> Result<Vec<f64>, IoError> {
    let mut values = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(values),
        _ => Err(IoError::Corrupt("trailing bytes after payload".into())),
    }
}

pub fn write_field(path: impl AsRef<Path>, field: &Field) -> Result<(), IoError> {
    let g = &field.grid;
    let header = serde_json::to_vec(&FieldHeader {
        bounds: g.bounds.clone(),
        h: g.h,
        shape: g.n_interior.clone(),
        ordering: "x-fastest".into(),
    })?;
    write_framed(path.as_ref(), &FIELD_MAGIC, FIELD_VERSION, &header, &field.values)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field, IoError> {
    let (header, mut r) = read_framed(path.as_ref(), &FIELD_MAGIC, FIELD_VERSION)?;
    let h: FieldHeader = serde_json::from_slice(&header)?;
    if h.ordering != "x-fastest" {
        return Err(IoError::Corrupt(format!("unknown ordering {:?}", h.ordering)));
    }
    let grid = GridSpec::from_box(&h.bounds, h.h)?;
    if grid.n_interior != h.shape {
        return Err(IoError::Corrupt(format!(
            "shape {:?} inconsistent with bounds and h (expected {:?})",
            h.shape, grid.n_interior
        )));
    }
    let values = read_payload(&mut r, grid.len())?;
    Ok(Field { grid, values })
}

pub fn write_stencil(path: impl AsRef<Path>, st: &Stencil) -> Result<(), IoError> {
    let header = serde_json::to_vec(&StencilHeader {
        d: st.params.d,
        alpha: st.params.alpha,
        gamma: st.params.gamma,
        n: st.n,
        h: st.h,
        rel_tol: st.quad_rel_tol,
        abs_tol: st.quad_abs_tol,
        c_norm: st.c_norm,
        tail: st.tail,
    })?;
    write_framed(path.as_ref(), &STENCIL_MAGIC, STENCIL_VERSION, &header, &st.coeffs)
}

pub fn read_stencil(path: impl AsRef<Path>) -> Result<Stencil, IoError> {
    let (header, mut r) = read_framed(path.as_ref(), &STENCIL_MAGIC, STENCIL_VERSION)?;
    let h: StencilHeader = serde_json::from_slice(&header)?;
    let params = FracParams::with_gamma(h.d, h.alpha, h.gamma)?;
    if h.n == 0 || !(h.h > 0.0 && h.h.is_finite()) {
        return Err(IoError::Corrupt(format!("invalid stencil extent N={} h={}", h.n, h.h)));
    }
    let len = (h.n + 1).pow(h.d as u32);
    let coeffs = read_payload(&mut r, len)?;
    Ok(Stencil {
        params,
        n: h.n,
        h: h.h,
        coeffs,
        c_norm: h.c_norm,
        tail: h.tail,
        quad_rel_tol: h.rel_tol,
        quad_abs_tol: h.abs_tol,
    })
}
