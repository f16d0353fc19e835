//! Binary state container.
//!
//! Layout: the 8-byte magic `IONSQBIN`, a little-endian `u64` header length,
//! a UTF-8 JSON header of that length, then the payload as little-endian
//! `f64` values (interleaved `re, im` for complex amplitudes).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{build_space_with_budget, SpaceSpec, SpinBosonState, BASIS_ORDERING};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"IONSQBIN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateHeader {
    /// Payload kind, e.g. `"spin_boson_state"` or `"twa_ensemble"`.
    pub format: String,
    pub version: u32,
    pub basis_ordering: String,
    #[serde(default)]
    pub spec: Option<SpaceSpec>,
    /// Number of `f64` values in the payload.
    pub payload_len: usize,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Writes a header and a raw `f64` payload.
pub fn write_container(path: &Path, header: &StateHeader, payload: &[f64]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for x in payload {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<(StateHeader, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidArgument(format!("{} is not a state container", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: StateHeader = serde_json::from_slice(&json)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported container version {}", header.version)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.payload_len {
        return Err(Error::InvalidArgument(format!(
            "payload has {} bytes, header declares {} values",
            bytes.len(),
            header.payload_len
        )));
    }
    let payload = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, payload))
}

pub fn save_state(path: &Path, state: &SpinBosonState, metadata: serde_json::Value) -> Result<()> {
    let header = StateHeader {
        format: "spin_boson_state".into(),
        version: FORMAT_VERSION,
        basis_ordering: BASIS_ORDERING.into(),
        spec: Some(state.basis.spec.clone()),
        payload_len: 2 * state.amps.len(),
        metadata,
    };
    let payload: Vec<f64> = state.amps.iter().flat_map(|a| [a.re, a.im]).collect();
    write_container(path, &header, &payload)
}

pub fn load_state(path: &Path) -> Result<(SpinBosonState, StateHeader)> {
    let (header, payload) = read_container(path)?;
    if header.format != "spin_boson_state" {
        return Err(Error::InvalidArgument(format!("container holds {}, not a state", header.format)));
    }
    if header.basis_ordering != BASIS_ORDERING {
        return Err(Error::InvalidArgument(format!("unknown basis ordering {}", header.basis_ordering)));
    }
    let spec = header.spec.clone().ok_or_else(|| Error::InvalidArgument("state header lacks a space spec".into()))?;
    let basis = build_space_with_budget(&spec, usize::MAX)?;
    let amps = payload.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
    Ok((SpinBosonState::from_amplitudes(basis, amps)?, header))
}
