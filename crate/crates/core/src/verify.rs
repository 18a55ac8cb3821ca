//! Named invariant checks over the dense operator oracle, as run by
//! `dfshift verify`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::factorization::{eigen_rank1, initial_double_factorization, reconstruct_two_body, FactorSet};
use crate::hamiltonian::{apply_symmetry_shift, Hamiltonian, OneBodyMatrix, ShiftParams};
use crate::optimizer::{Objective, Params};
use crate::oracle::{
    b_operator, build_hamiltonian_dense, excitation_operator, ladder_operator, number_operator, one_body_operator,
    sector_eigenvalues, verify_one_body_identity, DenseOperator, Spin,
};

/// Tolerance for every dense-operator identity.
pub const DENSE_TOLERANCE: f64 = 1e-9;
/// Tolerance on the worst relative finite-difference gradient mismatch.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// `N <= 2`.
    Fast,
    /// `N <= 3` plus finite-difference gradient checks.
    Full,
}

impl Level {
    pub fn max_orbitals(self) -> usize {
        match self {
            Level::Fast => 2,
            Level::Full => 3,
        }
    }
}

/// Deliberate corruptions used to confirm that the suite detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Subtracts instead of adds the `xi` terms in the shifted two-body tensor.
    ShiftSignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const SEED: u64 = 0x5eed_0f_0a_c1e;
const CASES_PER_SIZE: usize = 4;

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> OneBodyMatrix {
    OneBodyMatrix::from_upper_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize) -> Result<Hamiltonian> {
    let factors = (0..(n * n).min(2 * n)).map(|_| random_symmetric(rng, n, 0.5)).collect();
    let g = reconstruct_two_body(&FactorSet::new(n, factors)?);
    let n_e = rng.random_range(0..=2 * n);
    Hamiltonian::new(random_symmetric(rng, n, 1.0), g, rng.random_range(-1.0..1.0), n_e)
}

/// Shifted Hamiltonian, optionally with the sign of the two-body `xi` terms flipped.
pub fn shifted_hamiltonian(ham: &Hamiltonian, shift: &ShiftParams, fault: Option<Fault>) -> Result<Hamiltonian> {
    let good = apply_symmetry_shift(ham, shift)?;
    match fault {
        None => Ok(good),
        Some(Fault::ShiftSignFlip) => {
            let flipped = ShiftParams::new(shift.kappa, shift.xi.add_scaled(-2.0, &shift.xi)?, shift.n_e);
            let bad = apply_symmetry_shift(ham, &flipped)?;
            Hamiltonian::new(good.h, bad.g, good.core_constant, good.n_electrons)
        }
    }
}

struct Check {
    name: &'static str,
    tolerance: f64,
    worst: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, worst: 0.0 }
    }

    fn record(&mut self, deviation: f64) {
        // NaN must fail the check, so it cannot be folded through max.
        if deviation.is_nan() || deviation > self.worst {
            self.worst = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            max_deviation: self.worst,
            tolerance: self.tolerance,
            passed: self.worst <= self.tolerance,
        }
    }
}

fn spectrum_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ladder_checks(n: usize, anti: &mut Check) -> Result<()> {
    let id = DenseOperator::identity(n)?;
    let mut ops = Vec::new();
    for j in 0..n {
        for spin in Spin::BOTH {
            ops.push((ladder_operator(j, spin, false, n)?, ladder_operator(j, spin, true, n)?));
        }
    }
    for (p, (a, ad)) in ops.iter().enumerate() {
        for (q, (b, bd)) in ops.iter().enumerate() {
            anti.record(a.anticommutator(b).max_abs());
            anti.record(ad.anticommutator(bd).max_abs());
            let expected = if p == q { id.clone() } else { DenseOperator::zeros(n)? };
            anti.record(a.anticommutator(bd).max_deviation(&expected));
        }
    }
    Ok(())
}

fn b_checks(
    rng: &mut ChaCha8Rng,
    n: usize,
    nil: &mut Check,
    anti: &mut Check,
    unitary: &mut Check,
) -> Result<()> {
    let id = DenseOperator::identity(n)?;
    for spin in Spin::BOTH {
        let u = random_unit(rng, n);
        let b = b_operator(&u, spin, n)?;
        let bd = b.adjoint();
        nil.record(b.mul(&b).max_abs());
        anti.record(b.anticommutator(&bd).max_deviation(&id));
        let v = bd.mul(&b).scale(2.0).add(&id.scale(-1.0));
        unitary.record(v.mul(&v.adjoint()).max_deviation(&id));
    }
    Ok(())
}

fn excitation_check(rng: &mut ChaCha8Rng, n: usize, check: &mut Check) -> Result<()> {
    // Ladder-operator products against the bitwise construction.
    let a = random_symmetric(rng, n, 1.0);
    let ham = Hamiltonian::new(a.clone(), crate::hamiltonian::TwoBodyTensor::zeros(n), 0.0, 0)?;
    check.record(one_body_operator(&a)?.max_deviation(&build_hamiltonian_dense(&ham)?));
    // E_ij^dagger = E_ji.
    for i in 0..n {
        for j in 0..n {
            check.record(excitation_operator(i, j, n)?.adjoint().max_deviation(&excitation_operator(j, i, n)?));
        }
    }
    Ok(())
}

fn number_sector_check(n: usize, check: &mut Check) -> Result<()> {
    let ne = number_operator(n)?;
    for n_e in 0..=2 * n {
        for ev in sector_eigenvalues(&ne, n_e)? {
            check.record((ev - n_e as f64).abs());
        }
    }
    Ok(())
}

fn bliss_check(rng: &mut ChaCha8Rng, n: usize, fault: Option<Fault>, check: &mut Check) -> Result<()> {
    let ham = random_hamiltonian(rng, n)?;
    let shift = ShiftParams::new(rng.random_range(-2.0..2.0), random_symmetric(rng, n, 1.0), ham.n_electrons);
    let shifted = shifted_hamiltonian(&ham, &shift, fault)?;
    let before = sector_eigenvalues(&build_hamiltonian_dense(&ham)?, ham.n_electrons)?;
    let after = sector_eigenvalues(&build_hamiltonian_dense(&shifted)?, ham.n_electrons)?;
    check.record(spectrum_deviation(&before, &after));
    Ok(())
}

fn df_dense_check(rng: &mut ChaCha8Rng, n: usize, check: &mut Check) -> Result<()> {
    let ham = random_hamiltonian(rng, n)?;
    let full = initial_double_factorization(&ham.g, n * n)?;
    let rebuilt = Hamiltonian::new(ham.h.clone(), reconstruct_two_body(&full), ham.core_constant, ham.n_electrons)?;
    check.record(build_hamiltonian_dense(&ham)?.max_deviation(&build_hamiltonian_dense(&rebuilt)?));
    Ok(())
}

fn gradient_check(rng: &mut ChaCha8Rng, n: usize, rank: usize, check: &mut Check) -> Result<()> {
    let ham = random_hamiltonian(rng, n)?;
    let params = Params {
        kappa: rng.random_range(-1.0..1.0),
        xi: random_symmetric(rng, n, 0.3),
        factors: FactorSet::new(n, (0..rank).map(|_| random_symmetric(rng, n, 0.7)).collect())?,
    };
    let c = 10.0;
    let obj = Objective::new(&ham);
    let analytic = obj.evaluate_with_gradient(&params, c)?.1.pack();
    let x0 = params.pack();
    let step = 1e-5;
    for (idx, &g) in analytic.iter().enumerate() {
        let eval = |delta: f64| -> Result<f64> {
            let mut x = x0.clone();
            x[idx] += delta;
            Ok(obj.evaluate(&Params::unpack(n, rank, &x)?, c)?.total)
        };
        let fd = (eval(step)? - eval(-step)?) / (2.0 * step);
        let scale = g.abs().max(fd.abs());
        if scale > 1e-6 {
            check.record((g - fd).abs() / scale);
        }
    }
    Ok(())
}

/// Runs every check at the given level. Deterministic: the random instances
/// come from a fixed seed.
pub fn run_suite(level: Level, fault: Option<Fault>) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut anti = Check::new("ladder anticommutation", DENSE_TOLERANCE);
    let mut nil = Check::new("B nilpotency", DENSE_TOLERANCE);
    let mut b_anti = Check::new("B anticommutator", DENSE_TOLERANCE);
    let mut unitary = Check::new("V unitarity", DENSE_TOLERANCE);
    let mut excitation = Check::new("excitation operator", DENSE_TOLERANCE);
    let mut number = Check::new("number operator sectors", DENSE_TOLERANCE);
    let mut one_body = Check::new("one-body identity", DENSE_TOLERANCE);
    let mut trace = Check::new("trace identity", DENSE_TOLERANCE);
    let mut bliss = Check::new("BLISS invariance", DENSE_TOLERANCE);
    let mut df = Check::new("DF dense equality", DENSE_TOLERANCE);
    for n in 1..=level.max_orbitals() {
        ladder_checks(n, &mut anti)?;
        number_sector_check(n, &mut number)?;
        for _ in 0..CASES_PER_SIZE {
            b_checks(&mut rng, n, &mut nil, &mut b_anti, &mut unitary)?;
            excitation_check(&mut rng, n, &mut excitation)?;
            let a = random_symmetric(&mut rng, n, 1.0);
            one_body.record(verify_one_body_identity(&a)?);
            trace.record((a.trace() - eigen_rank1(&a).eigenvalues.iter().sum::<f64>()).abs());
            bliss_check(&mut rng, n, fault, &mut bliss)?;
            df_dense_check(&mut rng, n, &mut df)?;
        }
    }
    let mut checks: Vec<CheckResult> = [anti, nil, b_anti, unitary, excitation, number, one_body, trace, bliss, df]
        .into_iter()
        .map(Check::finish)
        .collect();
    if level == Level::Full {
        let mut grad = Check::new("gradient finite differences", GRADIENT_TOLERANCE);
        for (n, rank) in [(2, 1), (3, 2), (3, 3)] {
            gradient_check(&mut rng, n, rank, &mut grad)?;
        }
        checks.push(grad.finish());
    }
    Ok(VerifyReport { level, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suite_passes() {
        let report = run_suite(Level::Fast, None).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{} deviation {:e}", c.name, c.max_deviation);
        }
    }

    #[test]
    fn sign_flip_fails_only_bliss() {
        let report = run_suite(Level::Fast, Some(Fault::ShiftSignFlip)).unwrap();
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert_eq!(failed, ["BLISS invariance"]);
    }

    #[test]
    fn nan_fails_a_check() {
        let mut c = Check::new("x", 1.0);
        c.record(f64::NAN);
        c.record(0.5);
        assert!(!c.finish().passed);
    }
}
