//! Dense many-body operators on `2N` qubits via the Jordan-Wigner map, for
//! checking operator identities at small orbital counts.
//!
//! Spin-orbital `(j, sigma)` lives on qubit `q = j + N * sigma`. Basis states
//! are labelled little-endian: bit `q` of the basis index is the occupation of
//! qubit `q`, so the full matrix is `M_{2N-1} (x) ... (x) M_1 (x) M_0`.
//! `a_q = Z_0 ... Z_{q-1} (X_q + i Y_q) / 2` maps `|1>_q` to `|0>_q`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorization::eigen_rank1;
use crate::hamiltonian::{Hamiltonian, OneBodyMatrix};

/// Largest orbital count accepted (4096-dimensional operators).
pub const MAX_ORBITALS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up = 0,
    Down = 1,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];
}

/// Complex `2^(2N) x 2^(2N)` operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub n_orbitals: usize,
    pub matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn identity(n_orbitals: usize) -> Result<Self> {
        let dim = dimension(n_orbitals)?;
        Ok(Self {
            n_orbitals,
            matrix: DMatrix::identity(dim, dim),
        })
    }

    pub fn zeros(n_orbitals: usize) -> Result<Self> {
        let dim = dimension(n_orbitals)?;
        Ok(Self {
            n_orbitals,
            matrix: DMatrix::zeros(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_orbitals: self.n_orbitals,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            n_orbitals: self.n_orbitals,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n_orbitals: self.n_orbitals,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n_orbitals: self.n_orbitals,
            matrix: self.matrix.map(|z| z * s),
        }
    }

    /// `A B + B A`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.mul(other).add(&other.mul(self))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// `max |M - M^dagger|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_deviation(&self.adjoint())
    }

    /// Full spectrum, ascending. The operator must be Hermitian.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.matrix.clone())
    }
}

fn dimension(n_orbitals: usize) -> Result<usize> {
    if n_orbitals > MAX_ORBITALS {
        return Err(Error::OrbitalCap {
            n_orbitals,
            cap: MAX_ORBITALS,
        });
    }
    Ok(1usize << (2 * n_orbitals))
}

fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_y() -> DMatrix<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

/// Tensor product of single-qubit factors, `factors[q]` acting on qubit `q`.
fn kron_chain(factors: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    factors
        .iter()
        .fold(DMatrix::identity(1, 1), |acc, f| f.kronecker(&acc))
}

/// `a_{j sigma}` (or its adjoint) as a Pauli string.
pub fn ladder_operator(j: usize, spin: Spin, dagger: bool, n_orbitals: usize) -> Result<DenseOperator> {
    dimension(n_orbitals)?;
    if j >= n_orbitals {
        return Err(Error::OrbitalIndex { index: j, n_orbitals });
    }
    let target = j + n_orbitals * spin as usize;
    let i = Complex64::new(0.0, 1.0);
    let sign = if dagger { -1.0 } else { 1.0 };
    let site = (pauli_x() + pauli_y() * (i * sign)) * Complex64::new(0.5, 0.0);
    let factors: Vec<_> = (0..2 * n_orbitals)
        .map(|q| match q.cmp(&target) {
            std::cmp::Ordering::Less => pauli_z(),
            std::cmp::Ordering::Equal => site.clone(),
            std::cmp::Ordering::Greater => DMatrix::identity(2, 2),
        })
        .collect();
    Ok(DenseOperator {
        n_orbitals,
        matrix: kron_chain(&factors),
    })
}

/// `E_ij = sum_sigma a+_{i sigma} a_{j sigma}` from dense ladder operators.
pub fn excitation_operator(i: usize, j: usize, n_orbitals: usize) -> Result<DenseOperator> {
    let mut out = DenseOperator::zeros(n_orbitals)?;
    for spin in Spin::BOTH {
        let term = ladder_operator(i, spin, true, n_orbitals)?.mul(&ladder_operator(j, spin, false, n_orbitals)?);
        out = out.add(&term);
    }
    Ok(out)
}

/// `N_e = sum_i E_ii`.
pub fn number_operator(n_orbitals: usize) -> Result<DenseOperator> {
    let mut out = DenseOperator::zeros(n_orbitals)?;
    for i in 0..n_orbitals {
        out = out.add(&excitation_operator(i, i, n_orbitals)?);
    }
    Ok(out)
}

/// `One(A) = sum_ij A_ij E_ij`.
pub fn one_body_operator(a: &OneBodyMatrix) -> Result<DenseOperator> {
    let n = a.n_orbitals();
    let mut out = DenseOperator::zeros(n)?;
    for i in 0..n {
        for j in 0..n {
            if a.get(i, j) != 0.0 {
                out = out.add(&excitation_operator(i, j, n)?.scale(a.get(i, j)));
            }
        }
    }
    Ok(out)
}

/// `B_{u sigma} = sum_j u_j a_{j sigma}` for a real unit vector `u`.
pub fn b_operator(u: &DVector<f64>, spin: Spin, n_orbitals: usize) -> Result<DenseOperator> {
    if u.len() != n_orbitals {
        return Err(Error::DimensionMismatch {
            expected: n_orbitals,
            found: u.len(),
        });
    }
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitVector { norm });
    }
    let mut out = DenseOperator::zeros(n_orbitals)?;
    for (j, &uj) in u.iter().enumerate() {
        if uj != 0.0 {
            out = out.add(&ladder_operator(j, spin, false, n_orbitals)?.scale(uj));
        }
    }
    Ok(out)
}

/// Applies `a+_{p} a_{q}` (spin-orbital qubit indices) to basis state `s`.
#[inline]
fn hop(s: usize, p: usize, q: usize) -> Option<(usize, f64)> {
    if s & (1 << q) == 0 {
        return None;
    }
    let below = |state: usize, k: usize| (state & ((1usize << k) - 1)).count_ones();
    let mut sign = if below(s, q) % 2 == 0 { 1.0 } else { -1.0 };
    let t = s & !(1 << q);
    if t & (1 << p) != 0 {
        return None;
    }
    if below(t, p) % 2 == 1 {
        sign = -sign;
    }
    Some((t | (1 << p), sign))
}

/// Applies `E_ij` to basis state `s`, returning up to two `(state, coefficient)` terms.
fn apply_excitation(s: usize, i: usize, j: usize, n: usize) -> impl Iterator<Item = (usize, f64)> {
    Spin::BOTH
        .into_iter()
        .filter_map(move |spin| hop(s, i + n * spin as usize, j + n * spin as usize))
}

/// `c + sum h_ij E_ij + sum g_ijkl E_ij E_kl`, assembled by applying the
/// excitation operators to each basis state.
pub fn build_hamiltonian_dense(ham: &Hamiltonian) -> Result<DenseOperator> {
    let n = ham.n_orbitals();
    let dim = dimension(n)?;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        m[(s, s)] += ham.core_constant;
        for i in 0..n {
            for j in 0..n {
                let hij = ham.h.get(i, j);
                if hij != 0.0 {
                    for (t, c) in apply_excitation(s, i, j, n) {
                        m[(t, s)] += hij * c;
                    }
                }
            }
        }
        for k in 0..n {
            for l in 0..n {
                for (t, c1) in apply_excitation(s, k, l, n) {
                    for i in 0..n {
                        for j in 0..n {
                            let gijkl = ham.g.get(i, j, k, l);
                            if gijkl == 0.0 {
                                continue;
                            }
                            for (u, c2) in apply_excitation(t, i, j, n) {
                                m[(u, s)] += gijkl * c1 * c2;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(DenseOperator {
        n_orbitals: n,
        matrix: m.map(|v| Complex64::new(v, 0.0)),
    })
}

/// `max |One(A) - sum_{t sigma} lambda_t B+_{u_t sigma} B_{u_t sigma}|` with
/// the rank-1 terms taken from the eigendecomposition of `A`.
pub fn verify_one_body_identity(a: &OneBodyMatrix) -> Result<f64> {
    let n = a.n_orbitals();
    let lhs = one_body_operator(a)?;
    let dec = eigen_rank1(a);
    let mut rhs = DenseOperator::zeros(n)?;
    for (&lam, u) in dec.eigenvalues.iter().zip(&dec.vectors) {
        for spin in Spin::BOTH {
            let b = b_operator(u, spin, n)?;
            rhs = rhs.add(&b.adjoint().mul(&b).scale(lam));
        }
    }
    Ok(lhs.max_deviation(&rhs))
}

/// Spectrum of `op` restricted to basis states with `n_e` set bits, ascending.
pub fn sector_eigenvalues(op: &DenseOperator, n_e: usize) -> Result<Vec<f64>> {
    let n = op.n_orbitals;
    dimension(n)?;
    if n_e > 2 * n {
        return Err(Error::ElectronCount {
            n_electrons: n_e,
            max: 2 * n,
        });
    }
    let basis: Vec<usize> = (0..op.dim()).filter(|s| s.count_ones() as usize == n_e).collect();
    let sub = DMatrix::from_fn(basis.len(), basis.len(), |a, b| op.matrix[(basis[a], basis[b])]);
    Ok(hermitian_eigenvalues(sub))
}
