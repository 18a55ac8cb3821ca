//! Double factorization: rank-4 to rank-2 (`g ~ sum_r A_r (x) A_r`), then each
//! rank-2 factor to rank-1 terms by eigendecomposition, and the resulting
//! block-encoding constant `lambda_DF = 1/2 sum_r |A_r|_*^2 + |h'|_*`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{check_dims, OneBodyMatrix, TwoBodyTensor};

/// Relative threshold below which negative eigenvalues of the reshaped
/// two-body tensor are treated as noise and clamped to zero.
pub const INDEFINITE_TOLERANCE: f64 = 1e-8;

/// Ordered list of symmetric `N x N` matrices `A_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    n: usize,
    factors: Vec<OneBodyMatrix>,
}

impl FactorSet {
    pub fn new(n: usize, factors: Vec<OneBodyMatrix>) -> Result<Self> {
        for f in &factors {
            check_dims(n, f.n_orbitals())?;
        }
        if factors.len() > n * n {
            return Err(Error::InvalidRank {
                rank: factors.len(),
                max: n * n,
            });
        }
        Ok(Self { n, factors })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, factors: Vec::new() }
    }

    pub fn n_orbitals(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[OneBodyMatrix] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<OneBodyMatrix> {
        self.factors
    }

    /// `N^2 x R` matrix whose column `r` is `A_r` flattened row-major.
    pub fn to_columns(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_fn(nn, self.rank(), |a, r| {
            self.factors[r].get(a / self.n, a % self.n)
        })
    }
}

/// `A = sum_t lambda_t u_t u_t^T` with unit vectors `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Decomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

impl Rank1Decomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.vectors.first().map_or(0, |v| v.len());
        let mut out = DMatrix::zeros(n, n);
        for (&lam, u) in self.eigenvalues.iter().zip(&self.vectors) {
            out += lam * u * u.transpose();
        }
        out
    }

    pub fn abs_sum(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.abs()).sum()
    }
}

/// Breakdown of `lambda_DF = 1/2 sum_r Lambda_r^2 + Lambda_{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaBreakdown {
    pub lambda_total: f64,
    pub two_body_part: f64,
    pub one_body_part: f64,
    pub per_factor: Vec<f64>,
}

/// Flips `v` so its first entry that is not negligible is positive.
fn canonical_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(&x) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if x < 0.0 {
            v.neg_mut();
        }
    }
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Eigendecomposition of a symmetric matrix as rank-1 terms, ordered by
/// descending `|lambda|`, then descending `lambda`, then lexicographically by
/// vector. Each vector has a positive first nonzero entry.
pub fn eigen_rank1(a: &OneBodyMatrix) -> Rank1Decomposition {
    let n = a.n_orbitals();
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|t| {
            let mut v = eig.eigenvectors.column(t).into_owned();
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            canonical_sign(&mut v);
            (eig.eigenvalues[t], v)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        lb.abs()
            .total_cmp(&la.abs())
            .then(lb.total_cmp(la))
            .then_with(|| lex_cmp(va, vb))
    });
    let (eigenvalues, vectors) = pairs.into_iter().unzip();
    Rank1Decomposition { eigenvalues, vectors }
}

/// Sum of absolute eigenvalues, which is the nuclear norm for symmetric input.
pub fn nuclear_norm(a: &OneBodyMatrix) -> f64 {
    if a.n_orbitals() == 0 {
        return 0.0;
    }
    a.as_matrix()
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .sum()
}

pub fn lambda_df(factors: &FactorSet, h_prime: &OneBodyMatrix) -> Result<LambdaBreakdown> {
    check_dims(factors.n_orbitals(), h_prime.n_orbitals())?;
    let per_factor: Vec<f64> = factors.factors().par_iter().map(nuclear_norm).collect();
    let two_body_part = 0.5 * per_factor.iter().map(|l| l * l).sum::<f64>();
    let one_body_part = nuclear_norm(h_prime);
    Ok(LambdaBreakdown {
        lambda_total: two_body_part + one_body_part,
        two_body_part,
        one_body_part,
        per_factor,
    })
}

/// Standard double factorization: eigendecompose the `N^2 x N^2` reshape of
/// `g` as `sum_r d_r V_r V_r^T` and keep `A_r = sqrt(d_r) V_r` for the `rank`
/// largest `d_r`.
pub fn initial_double_factorization(g: &TwoBodyTensor, rank: usize) -> Result<FactorSet> {
    let n = g.n_orbitals();
    let nn = n * n;
    if rank < 1 || rank > nn {
        return Err(Error::InvalidRank { rank, max: nn });
    }
    let eig = SymmetricEigen::new(g.to_supermatrix());
    let mut order: Vec<usize> = (0..nn).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    let smallest = eig.eigenvalues[order[nn - 1]];
    if smallest < -INDEFINITE_TOLERANCE * largest.max(0.0) {
        return Err(Error::IndefiniteTensor {
            eigenvalue: smallest,
            largest,
        });
    }
    let factors = order[..rank]
        .iter()
        .map(|&c| {
            let d = eig.eigenvalues[c].max(0.0);
            let mut v = eig.eigenvectors.column(c).into_owned();
            canonical_sign(&mut v);
            let scale = d.sqrt();
            let m = DMatrix::from_fn(n, n, |i, j| scale * v[i * n + j]);
            OneBodyMatrix::symmetrized(m)
        })
        .collect();
    FactorSet::new(n, factors)
}

/// `sum_r A_r[i][j] A_r[k][l]`.
pub fn reconstruct_two_body(factors: &FactorSet) -> TwoBodyTensor {
    let fs = factors.factors();
    TwoBodyTensor::from_canonical_fn(factors.n_orbitals(), |i, j, k, l| {
        fs.iter().map(|a| a.get(i, j) * a.get(k, l)).sum()
    })
}

/// Squared Frobenius residual `sum_ijkl (g_ijkl - sum_r A_rij A_rkl)^2`.
pub fn frobenius_error(target: &TwoBodyTensor, factors: &FactorSet) -> Result<f64> {
    check_dims(target.n_orbitals(), factors.n_orbitals())?;
    let rec = reconstruct_two_body(factors);
    Ok(target
        .as_slice()
        .iter()
        .zip(rec.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}
