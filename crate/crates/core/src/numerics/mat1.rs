//! MAT1 binary matrix format.
//!
//! Layout, all little-endian:
//!
//! | offset | size        | content                         |
//! |--------|-------------|---------------------------------|
//! | 0      | 4           | ASCII `MAT1`                    |
//! | 4      | 4           | rows, `u32`                     |
//! | 8      | 4           | cols, `u32`                     |
//! | 12     | 8·rows·cols | IEEE-754 binary64, row-major    |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{DenseMatrix, NumericsError};

pub const MAGIC: &[u8; 4] = b"MAT1";
const HEADER_LEN: usize = 12;

pub fn encode(m: &DenseMatrix) -> Result<Vec<u8>, NumericsError> {
    let rows = u32::try_from(m.rows()).map_err(|_| NumericsError::TooLarge(m.rows()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| NumericsError::TooLarge(m.cols()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<DenseMatrix, NumericsError> {
    if bytes.len() < HEADER_LEN {
        return Err(NumericsError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(NumericsError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(NumericsError::TooLarge(rows.max(cols)))?;
    if bytes.len() != expected {
        return Err(NumericsError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_vec_finite(rows, cols, data)
}

pub fn write_to(m: &DenseMatrix, mut w: impl Write) -> Result<(), NumericsError> {
    w.write_all(&encode(m)?)?;
    Ok(())
}

pub fn read_from(mut r: impl Read) -> Result<DenseMatrix, NumericsError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

pub fn save(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<(), NumericsError> {
    fs::write(path, encode(m)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<DenseMatrix, NumericsError> {
    decode(&fs::read(path)?)
}
