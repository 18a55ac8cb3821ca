//! Deterministic inputs for the benchmarks.

use dfshift::{FactorSet, Hamiltonian, OneBodyMatrix, Params, TwoBodyTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> OneBodyMatrix {
    OneBodyMatrix::from_upper_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
}

/// `sum_r B_r (x) B_r` over `count` random symmetric `B_r`.
pub fn random_psd_tensor(rng: &mut ChaCha8Rng, n: usize, count: usize) -> TwoBodyTensor {
    let bs: Vec<OneBodyMatrix> = (0..count).map(|_| random_symmetric(rng, n, 0.3)).collect();
    let l = nalgebra::DMatrix::from_fn(n * n, count, |a, r| bs[r].get(a / n, a % n));
    TwoBodyTensor::from_supermatrix(n, &(&l * l.transpose()))
}

pub fn random_hamiltonian(seed: u64, n: usize) -> Hamiltonian {
    let mut r = rng(seed);
    let h = random_symmetric(&mut r, n, 1.0);
    let g = random_psd_tensor(&mut r, n, n);
    Hamiltonian::new(h, g, 0.0, n).expect("valid random Hamiltonian")
}

pub fn random_params(seed: u64, n: usize, rank: usize) -> Params {
    let mut r = rng(seed);
    Params {
        kappa: r.random_range(-1.0..1.0),
        xi: random_symmetric(&mut r, n, 0.3),
        factors: FactorSet::new(n, (0..rank).map(|_| random_symmetric(&mut r, n, 0.5)).collect())
            .expect("rank within bounds"),
    }
}
