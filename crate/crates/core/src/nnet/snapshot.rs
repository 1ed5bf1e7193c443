use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{count_params, NetConfig, Params};

/// File layout: 8-byte magic, u32 LE header length, JSON header,
/// then `parameter_count` f32 little-endian values in canonical flat
/// order. Writing the same header and parameters yields byte-identical
/// files; no timestamps or environment data are embedded.
const MAGIC: &[u8; 8] = b"HXSNAP01";

pub const SNAPSHOT_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub schema: u32,
    pub run_id: String,
    /// Index within the run's snapshot schedule.
    pub index: u32,
    pub net: NetConfig,
    /// Master seed of the producing run.
    pub seed: u64,
    pub env_steps: u64,
    pub games: u64,
    pub selfplay_forwards: u64,
    pub learner_samples: u64,
    pub train_flops: u64,
    pub parameter_count: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

pub fn write_snapshot(
    w: &mut impl Write,
    header: &SnapshotHeader,
    params: &Params<f32>,
) -> Result<(), SnapshotError> {
    let expected = count_params(params.cfg());
    if header.parameter_count != expected || header.net != *params.cfg() {
        return Err(SnapshotError::Corrupt(format!(
            "header declares {} params for {:?}, parameters have {expected}",
            header.parameter_count, header.net
        )));
    }
    let json = serde_json::to_vec(header).expect("header serializes");
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(expected as usize * 4);
    params.for_each_slice(|s| {
        for &x in s {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    });
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<(SnapshotHeader, Params<f32>), SnapshotError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::Corrupt("bad magic".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(SnapshotError::Corrupt(format!("unreasonable header length {len}")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: SnapshotHeader = serde_json::from_slice(&json)
        .map_err(|e| SnapshotError::Corrupt(format!("header: {e}")))?;
    if header.schema != SNAPSHOT_SCHEMA {
        return Err(SnapshotError::Corrupt(format!("unsupported schema {}", header.schema)));
    }
    header
        .net
        .validate()
        .map_err(|e| SnapshotError::Corrupt(format!("net config: {e}")))?;
    let expected = count_params(&header.net);
    if header.parameter_count != expected {
        return Err(SnapshotError::Corrupt(format!(
            "parameter count {} does not match config ({expected})",
            header.parameter_count
        )));
    }
    let mut bytes = vec![0u8; expected as usize * 4];
    r.read_exact(&mut bytes)?;
    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(SnapshotError::Corrupt("trailing bytes after parameters".into()));
    }
    let mut flat = Vec::with_capacity(expected as usize);
    for chunk in bytes.chunks_exact(4) {
        let x = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
        if !x.is_finite() {
            return Err(SnapshotError::Corrupt("non-finite parameter".into()));
        }
        flat.push(x);
    }
    let params = Params::from_flat(header.net, &flat)
        .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    Ok((header, params))
}
