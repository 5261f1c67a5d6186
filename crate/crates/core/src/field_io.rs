//! Binary field files.
//!
//! Layout: 16-byte magic, then little-endian `u32 version, u32 nx, u32 ny,
//! f64 lx, f64 ly, f64 t`, then `nx * ny` complex values as interleaved
//! `f64` pairs `(re, im)`, row-major with `x` as the leading index.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{DsError, Result};
use crate::spectral::{Field, Grid, Space};

pub const MAGIC: [u8; 16] = *b"DSII-FIELD\0\0\0\0\0\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16 + 4 + 4 + 4 + 8 + 8 + 8;

/// Serializes a physical-space field at time `t`.
pub fn write_field<W: Write>(mut w: W, field: &Field, t: f64) -> Result<()> {
    field.expect_space(Space::Physical)?;
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    buf.extend_from_slice(&g.lx().to_le_bytes());
    buf.extend_from_slice(&g.ly().to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> [u8; N] {
    let out: [u8; N] = bytes[*at..*at + N].try_into().expect("length checked");
    *at += N;
    out
}

/// Parses a field file, returning the field and its stored time.
pub fn read_field<R: Read>(mut r: R) -> Result<(Field, f64)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(DsError::Format(format!(
            "file too short for header: {} bytes",
            bytes.len()
        )));
    }
    if bytes[..16] != MAGIC {
        return Err(DsError::Format("bad magic".into()));
    }
    let mut at = 16;
    let version = u32::from_le_bytes(take(&bytes, &mut at));
    if version != VERSION {
        return Err(DsError::Format(format!("unsupported version {version}")));
    }
    let nx = u32::from_le_bytes(take(&bytes, &mut at)) as usize;
    let ny = u32::from_le_bytes(take(&bytes, &mut at)) as usize;
    let lx = f64::from_le_bytes(take(&bytes, &mut at));
    let ly = f64::from_le_bytes(take(&bytes, &mut at));
    let t = f64::from_le_bytes(take(&bytes, &mut at));
    let grid =
        Grid::new(nx, ny, lx, ly).map_err(|e| DsError::Format(format!("bad header: {e}")))?;
    let expected = HEADER_LEN + 16 * grid.len();
    if bytes.len() != expected {
        return Err(DsError::Format(format!(
            "expected {expected} bytes for a {nx}x{ny} field, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((Field::from_values(grid, Space::Physical, values)?, t))
}

pub fn save(path: impl AsRef<Path>, field: &Field, t: f64) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field, t)
}

pub fn load(path: impl AsRef<Path>) -> Result<(Field, f64)> {
    read_field(BufReader::new(File::open(path)?))
}
