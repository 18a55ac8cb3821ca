use std::path::PathBuf;

use thiserror::Error;

/// Failures while reading an FCIDUMP integral file. Every variant that can be
/// tied to a position in the file carries its 1-based line number.
#[derive(Debug, Error)]
pub enum FcidumpError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: non-finite integral value {value:?}")]
    NonFinite { line: usize, value: String },
    #[error("line {line}: orbital index {index} outside 1..={norb}")]
    IndexOutOfRange { line: usize, index: i64, norb: usize },
    #[error("line {line}: value {value} conflicts with symmetry-equivalent entry {previous} from line {previous_line}")]
    Asymmetric {
        line: usize,
        value: f64,
        previous: f64,
        previous_line: usize,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Fcidump(#[from] FcidumpError),
    #[error("dimension mismatch: expected {expected} orbitals, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric: |a_ij - a_ji| = {deviation:e} exceeds tolerance")]
    Asymmetric { deviation: f64 },
    #[error("two-body tensor violates 8-fold symmetry by {deviation:e}")]
    BrokenEightfold { deviation: f64 },
    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },
    #[error("electron count {n_electrons} outside 0..={max}")]
    ElectronCount { n_electrons: usize, max: usize },
    #[error("shift electron count {shift} does not match Hamiltonian electron count {hamiltonian}")]
    ElectronCountMismatch { shift: usize, hamiltonian: usize },
    #[error("two-body tensor is not representable as a sum of A (x) A: reshaped eigenvalue {eigenvalue:e} is negative beyond noise (largest eigenvalue {largest:e})")]
    IndefiniteTensor { eigenvalue: f64, largest: f64 },
    #[error("invalid factorization rank {rank}: must lie in 1..={max}")]
    InvalidRank { rank: usize, max: usize },
    #[error("dense operators support at most {cap} orbitals, got {n_orbitals}")]
    OrbitalCap { n_orbitals: usize, cap: usize },
    #[error("orbital index {index} out of range for {n_orbitals} orbitals")]
    OrbitalIndex { index: usize, n_orbitals: usize },
    #[error("vector norm {norm} is not 1 within 1e-12")]
    NonUnitVector { norm: f64 },
    #[error("non-finite cost at iteration {iter}")]
    NonFiniteCost { iter: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("archive: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
