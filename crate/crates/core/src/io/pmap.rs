//! PMAP: a little-endian binary container for probability maps.
//!
//! Layout: `b"PMAP"`, version byte `0x01`, height and width as `u32`, then
//! `height * width` `f32` values in row-major order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ProbabilityMap, PROBABILITY_SLACK};

pub const MAGIC: [u8; 4] = *b"PMAP";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 13;

pub fn encode(map: &ProbabilityMap) -> Result<Vec<u8>> {
    let (h, w) = map.dims();
    let (h32, w32) = match (u32::try_from(h), u32::try_from(w)) {
        (Ok(h), Ok(w)) => (h, w),
        _ => return Err(Error::domain(format!("{h}x{w} map exceeds PMAP dimension limits"))),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.values().len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses PMAP bytes. Values within [`PROBABILITY_SLACK`] of [0, 1] are
/// clamped; anything further out is rejected.
pub fn decode(bytes: &[u8], context: &str) -> Result<ProbabilityMap> {
    let fail = |msg: String| Error::format(context, msg);
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        let found = &bytes[..bytes.len().min(4)];
        return Err(fail(format!("bad magic {found:02X?}, expected \"PMAP\"")));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len())));
    }
    if bytes[4] != VERSION {
        return Err(fail(format!("unsupported version {:#04x}", bytes[4])));
    }
    let h = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let w = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    if h == 0 || w == 0 {
        return Err(fail(format!("zero dimension {h}x{w}")));
    }
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| fail(format!("dimension overflow {h}x{w}")))?;
    let payload = bytes.len();
    if payload < expected {
        return Err(fail(format!("truncated payload: {payload} of {expected} bytes")));
    }
    if payload > expected {
        return Err(fail(format!("{} trailing bytes after payload", payload - expected)));
    }
    let mut values = Vec::with_capacity(h * w);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        let wide = f64::from(v);
        if !(wide.is_finite() && (-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&wide)) {
            return Err(fail(format!("value {v} at ({}, {}) outside [0, 1]", i / w, i % w)));
        }
        values.push(v.clamp(0.0, 1.0));
    }
    ProbabilityMap::new(h, w, values)
}

pub fn read_pmap(path: &Path) -> Result<ProbabilityMap> {
    decode(&super::read_bytes(path)?, &path.display().to_string())
}

pub fn write_pmap(path: &Path, map: &ProbabilityMap) -> Result<()> {
    super::write_atomic(path, &encode(map)?)
}
