//! Mel cache files: `"MELS"`, u32 version, u32 rows, u32 cols, then
//! `rows × cols` f32 values, all little-endian, row-major.

use std::fs;
use std::path::{Path, PathBuf};

use super::MelSpectrogram;
use crate::error::{Error, Result};

pub const MEL_MAGIC: &[u8; 4] = b"MELS";
pub const MEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_mel(mel: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * mel.values.len());
    out.extend_from_slice(MEL_MAGIC);
    out.extend_from_slice(&MEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(mel.rows as u32).to_le_bytes());
    out.extend_from_slice(&(mel.cols as u32).to_le_bytes());
    for v in &mel.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a mel cache buffer; `path` is only used in error messages.
pub fn decode_mel(bytes: &[u8], path: &Path) -> Result<MelSpectrogram> {
    let fail = |offset: usize, reason: String| Error::Format {
        path: PathBuf::from(path),
        offset: offset as u64,
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(bytes.len(), format!("header needs {HEADER_LEN} bytes")));
    }
    if &bytes[..4] != MEL_MAGIC {
        return Err(fail(0, format!("bad magic {:?}", &bytes[..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != MEL_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MEL_VERSION,
        });
    }
    let (rows, cols) = (u32_at(8) as usize, u32_at(12) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| fail(8, format!("implausible shape {rows}×{cols}")))?;
    if bytes.len() < expected {
        return Err(fail(bytes.len(), format!("truncated payload: expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(fail(expected, "trailing bytes after payload".into()));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    MelSpectrogram::new(rows, cols, values)
}

pub fn write_mel(path: impl AsRef<Path>, mel: &MelSpectrogram) -> Result<()> {
    fs::write(path, encode_mel(mel))?;
    Ok(())
}

pub fn read_mel(path: impl AsRef<Path>) -> Result<MelSpectrogram> {
    let path = path.as_ref();
    decode_mel(&fs::read(path)?, path)
}
