//! Binary chain checkpoints.
//!
//! Layout, all little-endian: magic `GRADLAT1`, format version `u32`, `d`
//! and `N` as `u32`, `α β ε` as `f64`, sweep count `u64`, `φ` (`N^d` × `f64`),
//! `t` (`d·N^d` × `f64`), the ChaCha key (32 bytes), stream `u64` and word
//! position `u128`, then an FNV-1a 64 checksum of everything before it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gradlat_core::lattice::TorusLattice;
use gradlat_core::rng::StreamState;
use gradlat_core::sampler::{FieldState, ModelParams};

pub const MAGIC: &[u8; 8] = b"GRADLAT1";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 4 + 4 + 8 * 3 + 8;
const RNG_LEN: usize = 32 + 8 + 16;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (this build reads version {FORMAT_VERSION}); rerun the chain with this build or convert the file with the release that wrote it")]
    Version { found: u32 },
    #[error("checkpoint truncated or padded: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("checkpoint checksum mismatch (stored {stored:016x}, computed {computed:016x})")]
    Checksum { stored: u64, computed: u64 },
    #[error("checkpoint header is invalid: {0}")]
    Header(String),
}

/// FNV-1a, 64-bit.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn encode(state: &FieldState) -> Vec<u8> {
    let p = &state.params;
    let lat = p.lattice;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (state.phi.len() + state.t.len()) + RNG_LEN + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(lat.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(lat.side() as u32).to_le_bytes());
    for x in [p.alpha, p.beta, p.epsilon] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&state.sweep_count.to_le_bytes());
    for x in state.phi.iter().chain(&state.t) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let rng = state.rng_state();
    out.extend_from_slice(&rng.seed);
    out.extend_from_slice(&rng.stream.to_le_bytes());
    out.extend_from_slice(&rng.word_pos.to_le_bytes());
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const K: usize>(&mut self) -> [u8; K] {
        let mut a = [0u8; K];
        a.copy_from_slice(&self.bytes[self.pos..self.pos + K]);
        self.pos += K;
        a
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

pub fn decode(bytes: &[u8]) -> Result<FieldState, CheckpointError> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 8 };
    let version = r.u32();
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    let dim = r.u32() as usize;
    let side = r.u32() as usize;
    let lat = TorusLattice::new(dim, side).map_err(|e| CheckpointError::Header(e.to_string()))?;
    let (alpha, beta, epsilon) = (r.f64(), r.f64(), r.f64());
    let sweep_count = r.u64();
    let n = lat.num_vertices();
    let m = lat.num_edges();
    let expected = HEADER_LEN + 8 * (n + m) + RNG_LEN + 8;
    if bytes.len() != expected {
        return Err(CheckpointError::Length {
            expected,
            found: bytes.len(),
        });
    }
    let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().unwrap());
    let computed = fnv1a(&bytes[..expected - 8]);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed });
    }
    let phi: Vec<f64> = (0..n).map(|_| r.f64()).collect();
    let t: Vec<f64> = (0..m).map(|_| r.f64()).collect();
    let seed = r.take::<32>();
    let stream = r.u64();
    let word_pos = u128::from_le_bytes(r.take());
    let params = ModelParams::new(alpha, beta, epsilon, lat).map_err(|e| CheckpointError::Header(e.to_string()))?;
    FieldState::from_parts(params, phi, t, StreamState { seed, stream, word_pos }, sweep_count)
        .map_err(|e| CheckpointError::Header(e.to_string()))
}

/// Writes through a temporary file in the same directory and renames it, so
/// a failed write never leaves a partial checkpoint behind.
pub fn save(path: &Path, state: &FieldState) -> Result<(), CheckpointError> {
    write_atomic(path, &encode(state)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<FieldState, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// `ModelParams` equality up to the fields stored in the header.
pub fn same_model(a: &ModelParams, b: &ModelParams) -> bool {
    a.alpha.to_bits() == b.alpha.to_bits()
        && a.beta.to_bits() == b.beta.to_bits()
        && a.epsilon.to_bits() == b.epsilon.to_bits()
        && a.lattice == b.lattice
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradlat_core::sampler::GibbsSampler;

    fn state() -> FieldState {
        let p = ModelParams::new(0.3, 1.0, 0.5, TorusLattice::new(2, 4).unwrap()).unwrap();
        let g = GibbsSampler::new(p).unwrap();
        let mut s = FieldState::new(p, 5);
        for _ in 0..3 {
            g.sweep(&mut s).unwrap();
        }
        s
    }

    #[test]
    fn round_trip_is_exact() {
        let s = state();
        let bytes = encode(&s);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn corruption_is_refused() {
        let bytes = encode(&state());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(CheckpointError::BadMagic)));
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(matches!(decode(&bad), Err(CheckpointError::Version { found: 2 })));
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 3] ^= 1;
        assert!(matches!(decode(&bad), Err(CheckpointError::Checksum { .. })));
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Length { .. })));
    }
}
