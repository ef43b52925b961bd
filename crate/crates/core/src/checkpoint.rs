//! Shared layout for parameter checkpoints: 4-byte magic, `u32` version,
//! a fixed number of `u32` shape fields, then every tensor as little-endian
//! `f64` in the owner's `Parameters::tensors` order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Parameters;

pub const VERSION: u32 = 1;

pub fn encode<P: Parameters + ?Sized>(magic: &[u8; 4], dims: &[u32], params: &P) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 8 * params.num_params());
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for t in params.tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn save<P: Parameters + ?Sized>(path: &Path, magic: &[u8; 4], dims: &[u32], params: &P) -> Result<()> {
    fs::write(path, encode(magic, dims, params)).map_err(|e| Error::io(path, e))
}

/// Validates the header and returns the shape fields and the raw payload.
pub fn decode<'a>(bytes: &'a [u8], magic: &[u8; 4], version: u32, n_dims: usize) -> Result<(Vec<u32>, &'a [u8])> {
    let header = 8 + 4 * n_dims;
    if bytes.len() < header {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated header: {} of {header} bytes", bytes.len()),
        });
    }
    if &bytes[..4] != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            ),
        });
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found != version {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {found}"),
        });
    }
    let dims = (0..n_dims)
        .map(|k| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()))
        .collect();
    Ok((dims, &bytes[header..]))
}

/// Copies the payload into `params`, which must already have the right shapes.
pub fn fill<P: Parameters + ?Sized>(params: &mut P, payload: &[u8], header_len: usize) -> Result<()> {
    let expected = 8 * params.num_params();
    if payload.len() != expected {
        return Err(Error::Format {
            offset: (header_len + payload.len().min(expected)) as u64,
            message: format!("payload is {} bytes, expected {expected}", payload.len()),
        });
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = values.next().expect("length checked");
        }
    }
    Ok(())
}

pub fn load<P: Parameters + ?Sized>(
    path: &Path,
    magic: &[u8; 4],
    n_dims: usize,
    build: impl FnOnce(&[u32]) -> Result<Box<P>>,
) -> Result<Box<P>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, payload) = decode(&bytes, magic, VERSION, n_dims)?;
    let mut params = build(&dims)?;
    fill(params.as_mut(), payload, 8 + 4 * n_dims)?;
    Ok(params)
}
