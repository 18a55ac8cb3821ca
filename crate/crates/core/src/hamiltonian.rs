//! Hamiltonian data model in the excitation-operator form
//! `H = c + sum_ij h_ij E_ij + sum_ijkl g_ijkl E_ij E_kl`, together with the
//! symmetry-shift algebra acting on it.
//!
//! All energies are in Hartree.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance below which input asymmetry is averaged away.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

fn scale_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0_f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE)
}

/// Real symmetric `N x N` matrix. Entries are symmetric bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyMatrix {
    data: DMatrix<f64>,
}

impl OneBodyMatrix {
    /// Validates and symmetrizes `m`. Asymmetry above [`SYMMETRY_TOLERANCE`]
    /// (relative to the largest entry) is rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "one-body matrix",
            });
        }
        let scale = scale_of(m.iter().copied());
        let n = m.nrows();
        let mut deviation = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                deviation = deviation.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if deviation > SYMMETRY_TOLERANCE * scale {
            return Err(Error::Asymmetric { deviation });
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its transpose without any tolerance check.
    pub fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Self { data: m }
    }

    /// Builds a matrix from the upper triangle produced by `f(i, j)` with `i <= j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { data: m }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_upper_fn(n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn n_orbitals(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n_orbitals();
        (0..n).all(|i| (0..i).all(|j| self.data[(i, j)] == self.data[(j, i)]))
    }

    /// Entrywise `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &OneBodyMatrix) -> Result<Self> {
        check_dims(self.n_orbitals(), other.n_orbitals())?;
        Ok(Self::from_upper_fn(self.n_orbitals(), |i, j| {
            self.get(i, j) + alpha * other.get(i, j)
        }))
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.n_orbitals();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl Serialize for OneBodyMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OneBodyMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// The 8 index permutations that leave a two-body tensor invariant.
#[inline]
pub fn eightfold_orbit(i: usize, j: usize, k: usize, l: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (i, j, k, l),
        (j, i, k, l),
        (i, j, l, k),
        (j, i, l, k),
        (k, l, i, j),
        (l, k, i, j),
        (k, l, j, i),
        (l, k, j, i),
    ]
}

/// Canonical representative of an 8-fold orbit: `i <= j`, `k <= l`, `(i, j) <= (k, l)`.
#[inline]
pub fn canonical_index(i: usize, j: usize, k: usize, l: usize) -> (usize, usize, usize, usize) {
    let p = (i.min(j), i.max(j));
    let q = (k.min(l), k.max(l));
    if p <= q {
        (p.0, p.1, q.0, q.1)
    } else {
        (q.0, q.1, p.0, p.1)
    }
}

/// Dense real `N^4` tensor with the 8-fold permutation symmetry
/// `g_ijkl = g_jikl = g_ijlk = g_klij`, held exactly.
///
/// Storage is row-major in `(i, j, k, l)`, which is also the row-major layout
/// of the `N^2 x N^2` supermatrix `G[(i,j),(k,l)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyTensor {
    n: usize,
    data: Vec<f64>,
}

impl TwoBodyTensor {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n.pow(4)],
        }
    }

    /// Validates and symmetrizes a row-major `N^4` buffer.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(n.pow(4), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "two-body tensor",
            });
        }
        let t = Self { n, data };
        let deviation = t.eightfold_deviation();
        if deviation > SYMMETRY_TOLERANCE * scale_of(t.data.iter().copied()) {
            return Err(Error::BrokenEightfold { deviation });
        }
        Ok(t.symmetrized())
    }

    /// Tensor whose entries are produced by `f` on canonical indices and
    /// copied to the rest of each orbit.
    pub fn from_canonical_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for (i, j, k, l) in canonical_indices(n) {
            let v = f(i, j, k, l);
            t.fill_orbit(i, j, k, l, v);
        }
        t
    }

    /// Builds from an `N^2 x N^2` symmetric supermatrix and symmetrizes.
    pub fn from_supermatrix(n: usize, m: &DMatrix<f64>) -> Self {
        let nn = n * n;
        let mut data = vec![0.0; n.pow(4)];
        for a in 0..nn {
            for b in 0..nn {
                data[a * nn + b] = m[(a, b)];
            }
        }
        Self { n, data }.symmetrized()
    }

    fn symmetrized(mut self) -> Self {
        let n = self.n;
        for (i, j, k, l) in canonical_indices(n) {
            let orbit = eightfold_orbit(i, j, k, l);
            let v = orbit.map(|(a, b, c, d)| self.get(a, b, c, d));
            // pairwise means keep an already-symmetric orbit bit-exact
            let m = |x: f64, y: f64| 0.5 * (x + y);
            let avg = m(m(m(v[0], v[1]), m(v[2], v[3])), m(m(v[4], v[5]), m(v[6], v[7])));
            self.fill_orbit(i, j, k, l, avg);
        }
        self
    }

    fn fill_orbit(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        for (a, b, c, d) in eightfold_orbit(i, j, k, l) {
            let idx = self.index(a, b, c, d);
            self.data[idx] = v;
        }
    }

    pub fn n_orbitals(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.index(i, j, k, l)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute difference between any two members of an orbit.
    pub fn eightfold_deviation(&self) -> f64 {
        let mut dev = 0.0_f64;
        for (i, j, k, l) in canonical_indices(self.n) {
            let v0 = self.get(i, j, k, l);
            for (a, b, c, d) in eightfold_orbit(i, j, k, l) {
                dev = dev.max((self.get(a, b, c, d) - v0).abs());
            }
        }
        dev
    }

    pub fn is_eightfold_symmetric(&self) -> bool {
        self.eightfold_deviation() == 0.0
    }

    /// The `N^2 x N^2` matrix `G[(i,j),(k,l)] = g_ijkl`.
    pub fn to_supermatrix(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        // symmetric, so column-major fill of a row-major buffer is the same matrix
        DMatrix::from_column_slice(nn, nn, &self.data)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Canonical orbit representatives in a fixed order.
pub fn canonical_indices(n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..n).flat_map(move |i| {
        (i..n).flat_map(move |j| {
            (i..n).flat_map(move |k| {
                let l0 = if k == i { j } else { k };
                (l0..n).map(move |l| (i, j, k, l))
            })
        })
    })
}

/// Electronic Hamiltonian `c + sum h_ij E_ij + sum g_ijkl E_ij E_kl` with a
/// fixed electron count.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub h: OneBodyMatrix,
    pub g: TwoBodyTensor,
    pub core_constant: f64,
    pub n_electrons: usize,
}

impl Hamiltonian {
    pub fn new(h: OneBodyMatrix, g: TwoBodyTensor, core_constant: f64, n_electrons: usize) -> Result<Self> {
        check_dims(h.n_orbitals(), g.n_orbitals())?;
        let max = 2 * h.n_orbitals();
        if n_electrons > max {
            return Err(Error::ElectronCount { n_electrons, max });
        }
        if !core_constant.is_finite() {
            return Err(Error::NonFinite {
                what: "core constant",
            });
        }
        Ok(Self {
            h,
            g,
            core_constant,
            n_electrons,
        })
    }

    pub fn n_orbitals(&self) -> usize {
        self.h.n_orbitals()
    }
}

/// Parameters of the shift `H -> H + (sum_ij xi_ij E_ij + kappa)(N_e - n_e)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub kappa: f64,
    pub xi: OneBodyMatrix,
    pub n_e: usize,
}

impl ShiftParams {
    pub fn new(kappa: f64, xi: OneBodyMatrix, n_e: usize) -> Self {
        Self { kappa, xi, n_e }
    }

    pub fn zero(n_orbitals: usize, n_e: usize) -> Self {
        Self::new(0.0, OneBodyMatrix::zeros(n_orbitals), n_e)
    }
}

/// Rewrites `H + (sum xi_ij E_ij + kappa)(N_e - n_e)` in the original form:
///
/// * `h~_ij = h_ij - n_e xi_ij + kappa delta_ij`
/// * `g~_ijkl = g_ijkl + (xi_ij delta_kl + delta_ij xi_kl) / 2`
/// * `c~ = c - kappa n_e`
///
/// The result acts identically to `H` on every state with `n_e` electrons.
pub fn apply_symmetry_shift(ham: &Hamiltonian, shift: &ShiftParams) -> Result<Hamiltonian> {
    let n = ham.n_orbitals();
    check_dims(n, shift.xi.n_orbitals())?;
    if shift.n_e != ham.n_electrons {
        return Err(Error::ElectronCountMismatch {
            shift: shift.n_e,
            hamiltonian: ham.n_electrons,
        });
    }
    let ne = shift.n_e as f64;
    let xi = &shift.xi;
    let h = OneBodyMatrix::from_upper_fn(n, |i, j| {
        let diag = if i == j { shift.kappa } else { 0.0 };
        ham.h.get(i, j) - ne * xi.get(i, j) + diag
    });
    let g = TwoBodyTensor::from_canonical_fn(n, |i, j, k, l| {
        let mut extra = 0.0;
        if k == l {
            extra += xi.get(i, j);
        }
        if i == j {
            extra += xi.get(k, l);
        }
        ham.g.get(i, j, k, l) + 0.5 * extra
    });
    Hamiltonian::new(h, g, ham.core_constant - shift.kappa * ne, shift.n_e)
}

/// `h'_ij = h_ij + 2 sum_k g_ijkk`, the one-body matrix that is block encoded
/// once the two-body squares are expanded.
pub fn effective_one_body(ham: &Hamiltonian) -> OneBodyMatrix {
    let n = ham.n_orbitals();
    OneBodyMatrix::from_upper_fn(n, |i, j| {
        let s: f64 = (0..n).map(|k| ham.g.get(i, j, k, k)).sum();
        ham.h.get(i, j) + 2.0 * s
    })
}
