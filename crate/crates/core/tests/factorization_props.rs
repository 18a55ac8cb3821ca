mod common;

use common::*;
use dfshift::archive::{decode, encode};
use dfshift::{
    eigen_rank1, frobenius_error, initial_double_factorization, lambda_df, nuclear_norm, reconstruct_two_body,
    FactorSet, OneBodyMatrix,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nuclear_norm_matches_svd_and_is_orthogonally_invariant(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let a = random_symmetric(&mut r, n, 2.0);
        let q = random_orthogonal(&mut r, n);
        let rotated = OneBodyMatrix::symmetrized(&q * a.as_matrix() * q.transpose());
        let base = nuclear_norm(&a);
        prop_assert!((base - svd_nuclear_norm(&a)).abs() <= 1e-10 * (1.0 + base));
        prop_assert!((nuclear_norm(&rotated) - base).abs() <= 1e-10 * (1.0 + base));
    }

    #[test]
    fn nuclear_norm_bounds_trace(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let a = random_symmetric(&mut r, n, 3.0);
        prop_assert!(nuclear_norm(&a) >= a.trace().abs() - 1e-12);
    }

    #[test]
    fn random_decompositions_never_beat_the_nuclear_norm(seed in any::<u64>(), n in 1usize..5, extra in 0usize..6) {
        let mut r = rng(seed);
        let a = random_symmetric(&mut r, n, 1.0);
        let (lambdas, residual) = random_rank1_decomposition(&mut r, &a, n * (n + 1) / 2 + extra);
        prop_assume!(residual <= 1e-10);
        let sum: f64 = lambdas.iter().map(|l| l.abs()).sum();
        prop_assert!(sum >= nuclear_norm(&a) - 1e-9);
    }

    #[test]
    fn eigen_decomposition_attains_the_bound(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let a = random_symmetric(&mut r, n, 1.0);
        let dec = eigen_rank1(&a);
        prop_assert!((dec.abs_sum() - svd_nuclear_norm(&a)).abs() <= 1e-10);
        let back = dec.reconstruct();
        prop_assert!((back - a.as_matrix()).amax() <= 1e-12);
        prop_assert!((dec.eigenvalues.iter().sum::<f64>() - a.trace()).abs() <= 1e-12);
    }

    #[test]
    fn truncation_error_is_monotone_in_rank(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let g = random_psd_tensor(&mut r, n, n * n, 0.5);
        let mut prev = f64::INFINITY;
        for rank in 1..=n * n {
            let err = frobenius_error(&g, &initial_double_factorization(&g, rank).unwrap()).unwrap();
            prop_assert!(err <= prev + 1e-12);
            prev = err;
        }
        prop_assert!(prev <= 1e-10);
    }

    #[test]
    fn squared_error_matches_naive_loop(seed in any::<u64>(), n in 1usize..5, rank in 0usize..4) {
        let mut r = rng(seed);
        let g = random_psd_tensor(&mut r, n, 3, 0.5);
        let fs: Vec<_> = (0..rank.min(n * n)).map(|_| random_symmetric(&mut r, n, 0.5)).collect();
        let lib = frobenius_error(&g, &FactorSet::new(n, fs.clone()).unwrap()).unwrap();
        let naive = naive_squared_error(&g, &fs);
        prop_assert!((lib - naive).abs() <= 1e-12 * (1.0 + naive));
    }

    #[test]
    fn lambda_df_matches_svd_oracle(seed in any::<u64>(), n in 1usize..5, rank in 0usize..4) {
        let mut r = rng(seed);
        let fs: Vec<_> = (0..rank.min(n * n)).map(|_| random_symmetric(&mut r, n, 0.5)).collect();
        let hp = random_symmetric(&mut r, n, 1.0);
        let b = lambda_df(&FactorSet::new(n, fs.clone()).unwrap(), &hp).unwrap();
        let two: f64 = 0.5 * fs.iter().map(|a| svd_nuclear_norm(a).powi(2)).sum::<f64>();
        let one = svd_nuclear_norm(&hp);
        prop_assert!((b.two_body_part - two).abs() <= 1e-10 * (1.0 + two));
        prop_assert!((b.one_body_part - one).abs() <= 1e-10 * (1.0 + one));
        prop_assert!((b.lambda_total - (two + one)).abs() <= 1e-10 * (1.0 + two + one));
    }

    #[test]
    fn archive_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..5, rank in 0usize..5) {
        let mut r = rng(seed);
        let fs = FactorSet::new(n, (0..rank.min(n * n)).map(|_| random_symmetric(&mut r, n, 1e3)).collect()).unwrap();
        let (back, manifest) = decode(&encode(&fs, Some("00ff"))).unwrap();
        prop_assert_eq!(manifest.rank, fs.rank());
        for (a, b) in fs.factors().iter().zip(back.factors()) {
            for (x, y) in a.as_matrix().iter().zip(b.as_matrix().iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn full_rank_reproduces_random_psd_tensor_at_six_orbitals() {
    let mut r = rng(42);
    let g = random_psd_tensor(&mut r, 6, 20, 0.4);
    let f = initial_double_factorization(&g, 36).unwrap();
    assert!(frobenius_error(&g, &f).unwrap() <= 1e-10);
    let rebuilt = reconstruct_two_body(&f);
    assert!(naive_squared_error(&rebuilt, f.factors()) <= 1e-20);
}

#[test]
fn factorization_is_deterministic() {
    let mut r = rng(7);
    let g = random_psd_tensor(&mut r, 4, 6, 0.5);
    let a = initial_double_factorization(&g, 8).unwrap();
    let b = initial_double_factorization(&g, 8).unwrap();
    assert_eq!(encode(&a, None), encode(&b, None));
}
