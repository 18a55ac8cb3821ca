//! Binary container for a [`FactorSet`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  b"DFSFACT\0"
//! m_len      u32      length of the manifest in bytes
//! manifest   m_len    UTF-8 JSON, see ArchiveManifest
//! n          u64      orbitals
//! r          u64      factors
//! data       r*n*n    f64, factor-major, each factor row-major
//! ```
//!
//! Raw IEEE-754 bytes are stored, so a write/read cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::factorization::FactorSet;
use crate::hamiltonian::OneBodyMatrix;

pub const MAGIC: &[u8; 8] = b"DFSFACT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveManifest {
    pub format_version: u32,
    pub n_orbitals: usize,
    pub rank: usize,
    /// SHA-256 of the integral file the factors were computed from.
    pub source_sha256: Option<String>,
    /// SHA-256 of the `data` section.
    pub data_sha256: String,
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Archive(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

fn data_bytes(factors: &FactorSet) -> Vec<u8> {
    let n = factors.n_orbitals();
    let mut out = Vec::with_capacity(8 * n * n * factors.rank());
    for a in factors.factors() {
        for i in 0..n {
            for j in 0..n {
                out.extend_from_slice(&a.get(i, j).to_le_bytes());
            }
        }
    }
    out
}

pub fn encode(factors: &FactorSet, source_sha256: Option<&str>) -> Vec<u8> {
    let data = data_bytes(factors);
    let manifest = ArchiveManifest {
        format_version: FORMAT_VERSION,
        n_orbitals: factors.n_orbitals(),
        rank: factors.rank(),
        source_sha256: source_sha256.map(str::to_owned),
        data_sha256: sha256_hex(&data),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(8 + 4 + json.len() + 16 + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(factors.n_orbitals() as u64).to_le_bytes());
    out.extend_from_slice(&(factors.rank() as u64).to_le_bytes());
    out.extend_from_slice(&data);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Archive(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(FactorSet, ArchiveManifest)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Archive("bad magic, not a factor archive".into()));
    }
    let m_len = r.u32("manifest length")? as usize;
    let manifest: ArchiveManifest = serde_json::from_slice(r.take(m_len, "manifest")?)
        .map_err(|e| Error::Archive(format!("manifest: {e}")))?;
    if manifest.format_version > FORMAT_VERSION {
        return Err(Error::Archive(format!(
            "format version {} is newer than supported version {FORMAT_VERSION}",
            manifest.format_version
        )));
    }
    let n = r.u64("orbital count")? as usize;
    let rank = r.u64("rank")? as usize;
    if n != manifest.n_orbitals || rank != manifest.rank {
        return Err(Error::Archive("header disagrees with manifest".into()));
    }
    let len = n
        .checked_mul(n)
        .and_then(|x| x.checked_mul(rank))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| Error::Archive("size overflow".into()))?;
    let data = r.take(len, "factor data")?;
    if r.pos != bytes.len() {
        return Err(Error::Archive("trailing bytes after factor data".into()));
    }
    if sha256_hex(data) != manifest.data_sha256 {
        return Err(Error::Archive("data checksum mismatch".into()));
    }
    let mut values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut factors = Vec::with_capacity(rank);
    for _ in 0..rank {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| values.by_ref().take(n).collect()).collect();
        factors.push(OneBodyMatrix::from_rows(&rows)?);
    }
    Ok((FactorSet::new(n, factors)?, manifest))
}

pub fn write_archive(factors: &FactorSet, source_sha256: Option<&str>, path: &Path) -> Result<()> {
    fs::write(path, encode(factors, source_sha256))
        .map_err(|e| Error::Archive(format!("cannot write {}: {e}", path.display())))
}

pub fn read_archive(path: &Path) -> Result<(FactorSet, ArchiveManifest)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Archive(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FactorSet {
        let a = OneBodyMatrix::from_upper_fn(3, |i, j| 0.1 * (i + 2 * j) as f64 - 1.0 / 3.0);
        let b = OneBodyMatrix::from_upper_fn(3, |i, j| if i == j { f64::MIN_POSITIVE } else { -1e300 });
        FactorSet::new(3, vec![a, b]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let (g, m) = decode(&encode(&f, Some("abc"))).unwrap();
        assert_eq!(m.source_sha256.as_deref(), Some("abc"));
        for (x, y) in f.factors().iter().zip(g.factors()) {
            for (p, q) in x.as_matrix().iter().zip(y.as_matrix().iter()) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn empty_set_round_trips() {
        let (g, _) = decode(&encode(&FactorSet::empty(2), None)).unwrap();
        assert_eq!(g.rank(), 0);
        assert_eq!(g.n_orbitals(), 2);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode(&sample(), None);
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        assert!(matches!(decode(&bytes), Err(Error::Archive(_))));
        assert!(decode(&bytes[..10]).is_err());
        assert!(decode(b"NOTANARCHIVE").is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
