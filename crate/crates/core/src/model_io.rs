//! Binary model container.
//!
//! Layout:
//!
//! ```text
//! "DGVSE\0"                  6 bytes magic
//! header length              u32, little endian
//! header                     UTF-8 JSON object
//! payload                    f64 little endian, in this order:
//!                              w_item (d×r, row-major)
//!                              b_item (d)
//!                              item variance head (r), then its bias (1)
//!                              tag_means (s×d, row-major)
//!                              tag_logvars (s)
//! ```
//!
//! The header carries `format_version`, `d`, `r`, `s`, `distance`, `margin`,
//! `vocabulary` and `payload_floats`, the number of f64 values that follow.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::divergences::DistanceKind;
use crate::encoders::ModelParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"DGVSE\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    d: usize,
    r: usize,
    s: usize,
    distance: DistanceKind,
    margin: f64,
    vocabulary: Vec<String>,
    payload_floats: usize,
}

fn payload_len(d: usize, r: usize, s: usize) -> Option<usize> {
    let w = d.checked_mul(r)?;
    let t = s.checked_mul(d)?;
    w.checked_add(d)?.checked_add(r)?.checked_add(1)?.checked_add(t)?.checked_add(s)
}

pub fn encode_model(params: &ModelParams) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        d: params.dim,
        r: params.feature_dim,
        s: params.num_tags(),
        distance: params.distance_kind,
        margin: params.margin,
        vocabulary: params.vocabulary.clone(),
        payload_floats: params.num_parameters(),
    };
    let header = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + 8 * params.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for arr in params.arrays() {
        for v in arr {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let body = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| {
        if bytes.len() < MAGIC.len() && MAGIC.starts_with(bytes) {
            Error::TruncatedFile
        } else {
            Error::HeaderCorrupt("bad magic bytes".into())
        }
    })?;
    let (len_bytes, rest) = body.split_first_chunk::<4>().ok_or(Error::TruncatedFile)?;
    let header_len = u32::from_le_bytes(*len_bytes) as usize;
    if rest.len() < header_len {
        return Err(Error::TruncatedFile);
    }
    let (header_bytes, payload) = rest.split_at(header_len);

    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let version: Version =
        serde_json::from_slice(header_bytes).map_err(|e| Error::HeaderCorrupt(e.to_string()))?;
    if version.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(version.format_version));
    }
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| Error::HeaderCorrupt(e.to_string()))?;

    let expected = payload_len(header.d, header.r, header.s)
        .ok_or_else(|| Error::HeaderCorrupt("dimensions overflow".into()))?;
    if expected != header.payload_floats {
        return Err(Error::HeaderCorrupt(format!(
            "dimensions d={}, r={}, s={} imply {expected} values but header lists {}",
            header.d, header.r, header.s, header.payload_floats
        )));
    }
    if header.vocabulary.len() != header.s {
        return Err(Error::HeaderCorrupt(format!(
            "vocabulary has {} entries, s = {}",
            header.vocabulary.len(),
            header.s
        )));
    }
    if payload.len() < expected * 8 {
        return Err(Error::TruncatedFile);
    }
    if payload.len() > expected * 8 {
        return Err(Error::HeaderCorrupt(format!(
            "{} trailing bytes after payload",
            payload.len() - expected * 8
        )));
    }

    let mut params = ModelParams::zeros(header.d, header.r, header.vocabulary, header.distance, header.margin)
        .map_err(|e| Error::HeaderCorrupt(e.to_string()))?;
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for arr in params.arrays_mut() {
        for slot in arr.iter_mut() {
            *slot = values.next().expect("length checked above");
        }
    }
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(params))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode_model(&fs::read(path)?)
}
