//! Random instances and independent oracles shared by the integration tests.
//! Nothing here calls into the code path it is used to check.
#![allow(dead_code)]

use dfshift::{FactorSet, Hamiltonian, Objective, OneBodyMatrix, Params, TwoBodyTensor};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> OneBodyMatrix {
    OneBodyMatrix::from_upper_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// `sum_r B_r (x) B_r` for `count` random symmetric `B_r`, by direct loops.
pub fn random_psd_tensor(rng: &mut ChaCha8Rng, n: usize, count: usize, scale: f64) -> TwoBodyTensor {
    let bs: Vec<OneBodyMatrix> = (0..count).map(|_| random_symmetric(rng, n, scale)).collect();
    naive_reconstruct(n, &bs)
}

pub fn naive_reconstruct(n: usize, factors: &[OneBodyMatrix]) -> TwoBodyTensor {
    let mut data = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for a in factors {
                        s += a.get(i, j) * a.get(k, l);
                    }
                    data[((i * n + j) * n + k) * n + l] = s;
                }
            }
        }
    }
    TwoBodyTensor::new(n, data).unwrap()
}

pub fn naive_squared_error(g: &TwoBodyTensor, factors: &[OneBodyMatrix]) -> f64 {
    let n = g.n_orbitals();
    let mut err = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for a in factors {
                        s += a.get(i, j) * a.get(k, l);
                    }
                    let d = g.get(i, j, k, l) - s;
                    err += d * d;
                }
            }
        }
    }
    err
}

/// Sum of singular values through the SVD.
pub fn svd_nuclear_norm(a: &OneBodyMatrix) -> f64 {
    a.as_matrix().clone().svd(false, false).singular_values.sum()
}

pub fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize, n_e: usize) -> Hamiltonian {
    let h = random_symmetric(rng, n, 1.0);
    let g = random_psd_tensor(rng, n, n.max(2), 0.5);
    let c = rng.random_range(-1.0..1.0);
    Hamiltonian::new(h, g, c, n_e).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Params {
    Params {
        kappa: rng.random_range(-1.0..1.0),
        xi: random_symmetric(rng, n, 0.3),
        factors: FactorSet::new(n, (0..rank).map(|_| random_symmetric(rng, n, 0.7)).collect()).unwrap(),
    }
}

/// Central finite differences of `Total` in the packed parametrization.
pub fn finite_difference_gradient(objective: &Objective, params: &Params, c_approx: f64, step: f64) -> Vec<f64> {
    let n = params.xi.n_orbitals();
    let rank = params.factors.rank();
    let x0 = params.pack();
    (0..x0.len())
        .map(|idx| {
            let eval = |delta: f64| {
                let mut x = x0.clone();
                x[idx] += delta;
                let p = Params::unpack(n, rank, &x).unwrap();
                objective.evaluate(&p, c_approx).unwrap().total
            };
            (eval(step) - eval(-step)) / (2.0 * step)
        })
        .collect()
}

/// Worst relative error over components where either value exceeds `floor`.
pub fn worst_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, b)| a.abs().max(b.abs()) > floor)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
        .fold(0.0, f64::max)
}

/// A random decomposition `A = sum_t lambda_t u_t u_t^T`: `count` random unit
/// vectors, weights by least squares. Returns the weights and the Frobenius
/// residual of the fit.
pub fn random_rank1_decomposition(rng: &mut ChaCha8Rng, a: &OneBodyMatrix, count: usize) -> (Vec<f64>, f64) {
    let n = a.n_orbitals();
    let us: Vec<DVector<f64>> = (0..count).map(|_| random_unit(rng, n)).collect();
    let design = DMatrix::from_fn(n * n, count, |row, t| us[t][row / n] * us[t][row % n]);
    let target = DVector::from_fn(n * n, |row, _| a.get(row / n, row % n));
    let lambdas = design.clone().svd(true, true).solve(&target, 1e-14).unwrap();
    let residual = (design * &lambdas - target).norm();
    (lambdas.iter().copied().collect(), residual)
}
