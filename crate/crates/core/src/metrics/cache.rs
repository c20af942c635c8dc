//! Binary sidecar files for prebuilt metric payloads.
//!
//! Layout, all little-endian:
//! magic `BIAMMET1`, kind byte, 32-byte map hash, resolution (f64),
//! k (u32), t (u32), node count (u64), eigenvalue count (u64), eigenvalues,
//! then the payload as f64s.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::diffusion::DiffusionEmbedding;
use super::geodesic::GeodesicTable;
use super::MetricKind;

const MAGIC: &[u8; 8] = b"BIAMMET1";

/// Identifies which build a sidecar holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheKey {
    pub kind: MetricKind,
    pub map_hash: [u8; 32],
    pub resolution: f64,
    pub k: u32,
    pub t: u32,
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io: {0}")]
    Io(#[from] io::Error),
    #[error("not a metric cache file")]
    BadMagic,
    #[error("cache file truncated")]
    Truncated,
    #[error("cache key mismatch: file was built for a different map or parameters")]
    KeyMismatch,
}

fn kind_byte(kind: MetricKind) -> u8 {
    match kind {
        MetricKind::Euclidean => 0,
        MetricKind::Diffusion => 1,
        MetricKind::Geodesic => 2,
    }
}

fn encode(key: &CacheKey, nodes: u64, eigenvalues: &[f64], payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 1 + 32 + 8 + 8 + 16 + 8 * (eigenvalues.len() + payload.len()));
    out.extend_from_slice(MAGIC);
    out.push(kind_byte(key.kind));
    out.extend_from_slice(&key.map_hash);
    out.extend_from_slice(&key.resolution.to_le_bytes());
    out.extend_from_slice(&key.k.to_le_bytes());
    out.extend_from_slice(&key.t.to_le_bytes());
    out.extend_from_slice(&nodes.to_le_bytes());
    out.extend_from_slice(&(eigenvalues.len() as u64).to_le_bytes());
    for v in eigenvalues.iter().chain(payload) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CacheError> {
        if self.buf.len() < n {
            return Err(CacheError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CacheError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Returns (node count, eigenvalues, payload).
fn decode(bytes: &[u8], key: &CacheKey) -> Result<(usize, Vec<f64>, Vec<f64>), CacheError> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let kind = r.take(1)?[0];
    let hash = r.take(32)?;
    let resolution = r.f64()?;
    let k = r.u32()?;
    let t = r.u32()?;
    if kind != kind_byte(key.kind)
        || hash != key.map_hash
        || resolution.to_bits() != key.resolution.to_bits()
        || k != key.k
        || t != key.t
    {
        return Err(CacheError::KeyMismatch);
    }
    let nodes = r.u64()? as usize;
    let n_eig = r.u64()? as usize;
    let rest = r.buf;
    if !rest.len().is_multiple_of(8) || rest.len() / 8 < n_eig {
        return Err(CacheError::Truncated);
    }
    let mut vals = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let eig: Vec<f64> = vals.by_ref().take(n_eig).collect();
    let payload: Vec<f64> = vals.collect();
    Ok((nodes, eig, payload))
}

pub fn save_embedding(path: &Path, key: &CacheKey, emb: &DiffusionEmbedding) -> Result<(), CacheError> {
    let bytes = encode(key, emb.node_count() as u64, emb.eigenvalues(), emb.raw_coords());
    fs::write(path, bytes)?;
    Ok(())
}

/// The loaded embedding takes `source_revision` from the caller's current map.
pub fn load_embedding(
    path: &Path,
    key: &CacheKey,
    source_revision: u64,
) -> Result<DiffusionEmbedding, CacheError> {
    let bytes = fs::read(path)?;
    let (nodes, eig, coords) = decode(&bytes, key)?;
    let k = key.k as usize;
    if eig.len() != k || coords.len() != nodes * k {
        return Err(CacheError::Truncated);
    }
    Ok(DiffusionEmbedding::from_parts(k, key.t, eig, coords, source_revision))
}

pub fn save_geodesic(path: &Path, key: &CacheKey, table: &GeodesicTable) -> Result<(), CacheError> {
    let bytes = encode(key, table.node_count() as u64, &[], table.raw());
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_geodesic(
    path: &Path,
    key: &CacheKey,
    source_revision: u64,
) -> Result<GeodesicTable, CacheError> {
    let bytes = fs::read(path)?;
    let (nodes, _, dist) = decode(&bytes, key)?;
    if dist.len() != nodes * nodes {
        return Err(CacheError::Truncated);
    }
    Ok(GeodesicTable::from_parts(nodes, dist, source_revision))
}
