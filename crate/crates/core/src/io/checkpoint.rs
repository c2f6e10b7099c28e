//! Binary checkpoints: `HEXNS\x01`, then little-endian `u32 n`, `f64 box`,
//! `f64 time`, `f64 dissipation`, `f64 a`, `f64 b`, `f64 d` and `n²` vorticity
//! samples in row-major order.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::asymptotics::MomentumFlux;
use crate::grid::{Grid, GridScalarField};
use crate::solver::FlowState;

pub const MAGIC: &[u8; 6] = b"HEXNS\x01";
const HEADER: usize = 6 + 4 + 6 * 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u8),
    #[error("truncated checkpoint: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid checkpoint contents: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub fn encode_checkpoint(state: &FlowState) -> Vec<u8> {
    let grid = state.grid();
    let mut out = Vec::with_capacity(HEADER + 8 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    for v in [grid.box_len(), state.time, state.dissipation_accum, state.flux.a, state.flux.b, state.flux.d] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in state.omega.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

/// Decodes a checkpoint. The step counter is not stored and restarts at 0;
/// the flux rates are recomputed from the vorticity.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<FlowState, CheckpointError> {
    if bytes.len() < MAGIC.len() {
        return Err(CheckpointError::Truncated { expected: HEADER, found: bytes.len() });
    }
    if bytes[..5] != MAGIC[..5] {
        return Err(CheckpointError::Magic);
    }
    if bytes[5] != MAGIC[5] {
        return Err(CheckpointError::Version(bytes[5]));
    }
    if bytes.len() < HEADER {
        return Err(CheckpointError::Truncated { expected: HEADER, found: bytes.len() });
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let expected = HEADER + 8 * n * n;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::Invalid(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let h: Vec<f64> = (0..6).map(|i| f64_at(bytes, 10 + 8 * i)).collect();
    let grid = Grid::new(n, h[0]).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let values = (0..n * n).map(|i| f64_at(bytes, HEADER + 8 * i)).collect();
    let omega = GridScalarField::from_values(grid, values).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let mut state = FlowState::new(omega).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    state.time = h[1];
    state.dissipation_accum = h[2];
    state.flux = MomentumFlux { a: h[3], b: h[4], d: h[5], ..state.flux };
    Ok(state)
}

pub fn write_checkpoint(state: &FlowState, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(state)).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn read_checkpoint(path: &Path) -> Result<FlowState, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64) -> FlowState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(16, 3.5).unwrap();
        let mut values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        let mut s = FlowState::new(GridScalarField::from_values(grid, values).unwrap()).unwrap();
        s.time = rng.random();
        s.dissipation_accum = rng.random();
        s.flux.a = rng.random();
        s.flux.b = rng.random_range(-1.0..1.0);
        s.flux.d = rng.random();
        s
    }

    #[test]
    fn round_trip_is_exact() {
        for seed in 0..5 {
            let s = random_state(seed);
            let back = decode_checkpoint(&encode_checkpoint(&s)).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.flux.a.to_bits(), s.flux.a.to_bits());
        }
    }

    #[test]
    fn distinct_errors() {
        let bytes = encode_checkpoint(&random_state(1));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated { .. })));
        assert!(matches!(decode_checkpoint(&bytes[..20]), Err(CheckpointError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(CheckpointError::Magic)));
        let mut v2 = bytes.clone();
        v2[5] = 2;
        assert!(matches!(decode_checkpoint(&v2), Err(CheckpointError::Version(2))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let s = random_state(7);
        write_checkpoint(&s, &p).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), s);
        assert!(matches!(read_checkpoint(&dir.path().join("missing")), Err(CheckpointError::Io { .. })));
    }
}
