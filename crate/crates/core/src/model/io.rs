//! Binary parameter file.
//!
//! ```text
//! "BSEQ"                      4 bytes
//! version                     u8 (= 1)
//! d, m, h, layers             u32 little-endian each
//! payload                     f32 little-endian, row-major, in the order
//!                             of `ModelParams::tensors`
//! ```
//!
//! The header is validated before any payload is read. Encoding is
//! canonical: equal parameters always produce identical bytes.

use std::fs;
use std::path::Path;

use super::ModelParams;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BSEQ";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 * 4;

pub fn encode_params(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.num_parameters());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    for dim in [params.d(), params.m(), params.h(), params.num_layers()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for (_, t) in params.tensors() {
        for &v in t {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// `(d, m, h, layers)` from a file header.
fn read_header(bytes: &[u8]) -> Result<[usize; 4]> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Version {
            found: bytes[4],
            expected: FORMAT_VERSION,
        });
    }
    let mut dims = [0usize; 4];
    for (i, dim) in dims.iter_mut().enumerate() {
        let at = 5 + 4 * i;
        *dim = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    }
    if dims.contains(&0) {
        return Err(Error::ShapeMismatch(format!(
            "header dimensions {dims:?} must be positive"
        )));
    }
    Ok(dims)
}

fn parameter_count([d, m, h, layers]: [usize; 4]) -> Option<usize> {
    let g = h.checked_mul(4)?;
    let first = m.checked_add(h)?.checked_mul(g)?.checked_add(g)?;
    let rest = (2 * h).checked_add(h)?.checked_mul(g)?.checked_add(g)?;
    let lstm = first.checked_add(rest.checked_mul(layers - 1)?)?.checked_mul(2)?;
    d.checked_mul(m)?
        .checked_add(m)?
        .checked_add(lstm)?
        .checked_add(2 * h + 1)
}

pub fn decode_params(bytes: &[u8]) -> Result<ModelParams> {
    let dims = read_header(bytes)?;
    let count = parameter_count(dims)
        .filter(|c| c.checked_mul(4).is_some())
        .ok_or_else(|| Error::ShapeMismatch(format!("header dimensions {dims:?} overflow")))?;
    let expected = HEADER_LEN + 4 * count;
    let found = bytes.len();
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::ShapeMismatch(format!(
            "header {dims:?} implies {expected} bytes but the file has {found}"
        )));
    }
    let [d, m, h, layers] = dims;
    let mut params = ModelParams::zeros(d, m, h, layers);
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
    for (_, t) in params.tensors_mut() {
        for (dst, src) in t.iter_mut().zip(&mut floats) {
            *dst = src;
        }
    }
    params.check_finite()?;
    Ok(params)
}

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    params.validate()?;
    Ok(fs::write(path, encode_params(params))?)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode_params(&fs::read(path)?)
}

/// Load and require the header to match `(d, m, h, layers)`.
pub fn load_params_expecting(
    path: impl AsRef<Path>,
    d: usize,
    m: usize,
    h: usize,
    layers: usize,
) -> Result<ModelParams> {
    let bytes = fs::read(path)?;
    let dims = read_header(&bytes)?;
    if dims != [d, m, h, layers] {
        return Err(Error::ShapeMismatch(format!(
            "file has (d, m, h, layers) = {dims:?}, expected {:?}",
            [d, m, h, layers]
        )));
    }
    decode_params(&bytes)
}
