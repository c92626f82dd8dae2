//! Parameter file.
//!
//! ```text
//! magic     4 bytes "DGM1"
//! version   u32     1
//! config    11 × u32: channels, timesteps, num_domains, num_classes,
//!           conv1_filters, conv1_kernel, conv2_filters, conv2_kernel,
//!           pool, branch_width, domain_hidden
//! count     u64     number of parameters that follow
//! values    f64 × count, blocks in `ModelParams::groups` order
//! ```
//!
//! Everything is little-endian.

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 4] = b"DGM1";
const VERSION: u32 = 1;

fn config_fields(c: &ModelConfig) -> [usize; 11] {
    [
        c.channels,
        c.timesteps,
        c.num_domains,
        c.num_classes,
        c.conv1_filters,
        c.conv1_kernel,
        c.conv2_filters,
        c.conv2_kernel,
        c.pool,
        c.branch_width,
        c.domain_hidden,
    ]
}

pub fn params_to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * params.len());
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for f in config_fields(&params.config) {
        out.extend_from_slice(&(f as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for (_, block) in params.groups() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_params(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, params_to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn params_from_bytes(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let corrupt = |reason: &str| Error::Corrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let header = 4 + 4 + 11 * 4 + 8;
    if bytes.len() < header {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != PARAMS_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    if u32_at(4) as u32 != VERSION {
        return Err(corrupt("unsupported version"));
    }
    let f: Vec<usize> = (0..11).map(|i| u32_at(8 + 4 * i)).collect();
    let config = ModelConfig {
        channels: f[0],
        timesteps: f[1],
        num_domains: f[2],
        num_classes: f[3],
        conv1_filters: f[4],
        conv1_kernel: f[5],
        conv2_filters: f[6],
        conv2_kernel: f[7],
        pool: f[8],
        branch_width: f[9],
        domain_hidden: f[10],
    };
    config.validate().map_err(|e| corrupt(&e.to_string()))?;
    let count = u64::from_le_bytes(bytes[header - 8..header].try_into().unwrap()) as usize;
    if count != config.param_count() {
        return Err(corrupt("parameter count does not match the stored configuration"));
    }
    if bytes.len() != header + 8 * count {
        return Err(corrupt(&format!(
            "expected {} bytes, found {}",
            header + 8 * count,
            bytes.len()
        )));
    }
    let mut params = ModelParams::zeros(&config);
    let mut pos = header;
    for (_, block) in params.groups_mut() {
        for v in block.iter_mut() {
            *v = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
            pos += 8;
        }
    }
    if !params.is_finite() {
        return Err(corrupt("non-finite parameter"));
    }
    Ok(params)
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    params_from_bytes(&bytes, path)
}

/// Loads and refuses files whose stored configuration differs from `expected`.
pub fn load_params_checked(path: &Path, expected: &ModelConfig) -> Result<ModelParams> {
    let params = load_params(path)?;
    if &params.config != expected {
        return Err(Error::ConfigMismatch(format!(
            "{} holds {:?}, expected {:?}",
            path.display(),
            params.config,
            expected
        )));
    }
    Ok(params)
}
