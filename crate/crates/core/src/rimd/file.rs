//! Binary feature files.
//!
//! ```text
//! "RIMD" | u32 version | u32 n | u32 directed edges | 32-byte connectivity digest | f64 data (LE)
//! ```

use std::fs;
use std::path::Path;

use super::RimdFeature;
use crate::error::{Error, Result};
use crate::mesh::ConnectivityKey;

const MAGIC: &[u8; 4] = b"RIMD";
pub const FEATURE_FILE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 32;

pub fn write_feature_file(
    path: impl AsRef<Path>,
    feature: &RimdFeature,
    key: &ConnectivityKey,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * feature.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FEATURE_FILE_VERSION.to_le_bytes());
    out.extend_from_slice(&(feature.vertex_count() as u32).to_le_bytes());
    out.extend_from_slice(&(feature.edge_count() as u32).to_le_bytes());
    out.extend_from_slice(&key.0);
    for x in feature.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a feature file and returns it with its stored connectivity digest.
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<(RimdFeature, ConnectivityKey)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::corrupt(path, "not a RIMD feature file"));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_FILE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FEATURE_FILE_VERSION,
        });
    }
    let n = u32_at(8) as usize;
    let edges = u32_at(12) as usize;
    let key = ConnectivityKey(bytes[16..48].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let expected = RimdFeature::len_for(n, edges);
    if body.len() != 8 * expected {
        return Err(Error::corrupt(
            path,
            format!("expected {expected} values, found {} bytes", body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((RimdFeature::from_vec(n, edges, data)?, key))
}
