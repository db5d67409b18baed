//! On-disk colorizer container: magic, a JSON header, then the raw f32
//! little-endian parameter blob in the model's canonical slice order.
//! Round-trips preserve forward outputs bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uncolorable_core::colorizer::{Architecture, Colorizer};

use crate::error::{CliError, Result};

const MAGIC: &[u8; 8] = b"UNCOLORM";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelHeader {
    pub schema_version: u32,
    pub arch: String,
    pub seed: u64,
    /// SHA-256 of the training corpus, hex; empty when unknown.
    pub corpus_hash: String,
    pub param_count: usize,
}

pub fn save_model(
    path: &Path,
    model: &Colorizer<f32>,
    seed: u64,
    corpus_hash: &str,
) -> Result<()> {
    let header = ModelHeader {
        schema_version: SCHEMA_VERSION,
        arch: model.arch().as_str().to_string(),
        seed,
        corpus_hash: corpus_hash.to_string(),
        param_count: model.param_count(),
    };
    let hjson = serde_json::to_vec(&header)
        .map_err(|e| CliError::ModelFormat(format!("header serialization failed: {e}")))?;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(hjson.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&hjson);
    for slice in model.param_slices() {
        for &v in slice {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(Colorizer<f32>, ModelHeader)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let (model, header, _) = decode_model(&bytes)?;
    Ok((model, header))
}

/// Loads and additionally checks the architecture against an expectation.
pub fn load_model_expecting(path: &Path, arch: Architecture) -> Result<Colorizer<f32>> {
    let (model, header) = load_model(path)?;
    if model.arch() != arch {
        return Err(CliError::ModelFormat(format!(
            "architecture mismatch: file holds {}, expected {}",
            header.arch,
            arch.as_str()
        )));
    }
    Ok(model)
}

fn decode_model(bytes: &[u8]) -> Result<(Colorizer<f32>, ModelHeader, usize)> {
    let fail = |msg: &str| CliError::ModelFormat(msg.to_string());
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(fail("bad magic; not a model file"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < hlen {
        return Err(fail("truncated header"));
    }
    let header: ModelHeader = serde_json::from_slice(&body[..hlen])
        .map_err(|e| CliError::ModelFormat(format!("unreadable header: {e}")))?;
    if header.schema_version > SCHEMA_VERSION {
        return Err(CliError::ModelFormat(format!(
            "schema version {} is newer than the supported {}",
            header.schema_version, SCHEMA_VERSION
        )));
    }
    let arch: Architecture = header
        .arch
        .parse()
        .map_err(|_| CliError::ModelFormat(format!("unknown architecture id {:?}", header.arch)))?;
    let mut model = Colorizer::new(arch, header.seed);
    if model.param_count() != header.param_count {
        return Err(CliError::ModelFormat(format!(
            "parameter count mismatch: header says {}, architecture has {}",
            header.param_count,
            model.param_count()
        )));
    }
    let blob = &body[hlen..];
    if blob.len() != header.param_count * 4 {
        return Err(fail("parameter blob length does not match header"));
    }
    let mut off = 0usize;
    for slice in model.param_slices_mut() {
        for v in slice.iter_mut() {
            *v = f32::from_le_bytes(blob[off..off + 4].try_into().unwrap());
            off += 4;
        }
    }
    Ok((model, header, off))
}
