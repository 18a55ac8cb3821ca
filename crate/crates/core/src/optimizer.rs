//! Joint minimization of `Total = C_approx * Err + lambda` over the shift
//! parameters `(kappa, xi)` and the factor matrices `A_r`.
//!
//! Symmetric matrices are parametrized by their upper triangles: the gradient
//! entry `(i, j)` is the derivative with respect to the single parameter
//! shared by `M_ij` and `M_ji`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{frobenius_error, initial_double_factorization, lambda_df, FactorSet, LambdaBreakdown};
use crate::hamiltonian::{apply_symmetry_shift, check_dims, effective_one_body, Hamiltonian, OneBodyMatrix, ShiftParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizationConfig {
    /// Penalty weight on `Err`; `None` selects it from the initial point.
    pub c_approx: Option<f64>,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Stop once the best total improved by less than this fraction over
    /// the last `patience` iterations.
    pub rel_tol: f64,
    pub patience: usize,
    pub seed: u64,
    /// Allowed growth of `Err` over the initial point for the result to be
    /// reported as feasible.
    pub err_budget: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            c_approx: None,
            max_iters: 10_000,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            rel_tol: 1e-7,
            patience: 200,
            seed: 0,
            err_budget: 1e-6,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if let Some(c) = self.c_approx {
            if !(c.is_finite() && c > 0.0) {
                return fail("c_approx must be positive");
            }
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon >= 0.0) {
            return fail("adam_epsilon must be nonnegative");
        }
        if !(self.rel_tol.is_finite() && self.rel_tol >= 0.0) {
            return fail("rel_tol must be nonnegative");
        }
        if self.patience == 0 {
            return fail("patience must be positive");
        }
        if !(self.err_budget.is_finite() && self.err_budget >= 0.0) {
            return fail("err_budget must be nonnegative");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `10^3 * lambda / max(Err, 1e-12)`, clamped to `[1e2, 1e9]`.
pub fn default_c_approx(lambda_init: f64, err_init: f64) -> f64 {
    (1e3 * lambda_init / err_init.max(1e-12)).clamp(1e2, 1e9)
}

/// Optimization variables. Also used for gradients, in the upper-triangle
/// convention described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub kappa: f64,
    pub xi: OneBodyMatrix,
    pub factors: FactorSet,
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn pack_into(m: &OneBodyMatrix, out: &mut Vec<f64>) {
    let n = m.n_orbitals();
    for i in 0..n {
        for j in i..n {
            out.push(m.get(i, j));
        }
    }
}

fn unpack(n: usize, values: &[f64]) -> OneBodyMatrix {
    let mut it = values.iter();
    OneBodyMatrix::from_upper_fn(n, |_, _| *it.next().expect("packed length"))
}

impl Params {
    /// `kappa = 0`, `xi = 0`, factors from the standard double factorization.
    pub fn initial(ham: &Hamiltonian, rank: usize) -> Result<Self> {
        let n = ham.n_orbitals();
        Ok(Self {
            kappa: 0.0,
            xi: OneBodyMatrix::zeros(n),
            factors: initial_double_factorization(&ham.g, rank)?,
        })
    }

    pub fn n_orbitals(&self) -> usize {
        self.xi.n_orbitals()
    }

    pub fn shift(&self, n_e: usize) -> ShiftParams {
        ShiftParams::new(self.kappa, self.xi.clone(), n_e)
    }

    /// `[kappa, xi (upper, row-major), A_0 (upper), ..., A_{R-1} (upper)]`.
    pub fn pack(&self) -> Vec<f64> {
        let n = self.n_orbitals();
        let mut out = Vec::with_capacity(1 + (1 + self.factors.rank()) * packed_len(n));
        out.push(self.kappa);
        pack_into(&self.xi, &mut out);
        for a in self.factors.factors() {
            pack_into(a, &mut out);
        }
        out
    }

    pub fn unpack(n: usize, rank: usize, values: &[f64]) -> Result<Self> {
        let p = packed_len(n);
        check_dims(1 + (1 + rank) * p, values.len())?;
        let xi = unpack(n, &values[1..1 + p]);
        let factors = values[1 + p..].chunks(p).map(|c| unpack(n, c)).collect();
        Ok(Self {
            kappa: values[0],
            xi,
            factors: FactorSet::new(n, factors)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub total: f64,
    pub err: f64,
    pub lambda: f64,
}

/// Nuclear norm and the subgradient `sum_t sign(lambda_t) u_t u_t^T`, with
/// `sign(0) = 0`.
fn nuclear_norm_subgradient(m: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut sub = DMatrix::zeros(n, n);
    let mut norm = 0.0;
    for (t, &lam) in eig.eigenvalues.iter().enumerate() {
        norm += lam.abs();
        let s = if lam > 0.0 {
            1.0
        } else if lam < 0.0 {
            -1.0
        } else {
            0.0
        };
        if s != 0.0 {
            let u = eig.eigenvectors.column(t);
            sub += s * u * u.transpose();
        }
    }
    (norm, sub)
}

/// Derivative with respect to the shared upper-triangle parameter of a
/// symmetric gradient `grad` taken over independent entries.
fn fold_symmetric(grad: &DMatrix<f64>) -> OneBodyMatrix {
    OneBodyMatrix::from_upper_fn(grad.nrows(), |i, j| {
        if i == j {
            grad[(i, i)]
        } else {
            grad[(i, j)] + grad[(j, i)]
        }
    })
}

/// Precomputed pieces of `Total` for one Hamiltonian.
#[derive(Debug, Clone)]
pub struct Objective {
    n: usize,
    n_e: usize,
    g_super: DMatrix<f64>,
    h_prime: OneBodyMatrix,
}

impl Objective {
    pub fn new(ham: &Hamiltonian) -> Self {
        Self {
            n: ham.n_orbitals(),
            n_e: ham.n_electrons,
            g_super: ham.g.to_supermatrix(),
            h_prime: effective_one_body(ham),
        }
    }

    /// `h~' = h' + (N - n_e) xi + (kappa + tr xi) I`.
    pub fn shifted_effective_one_body(&self, kappa: f64, xi: &OneBodyMatrix) -> OneBodyMatrix {
        let scale = self.n as f64 - self.n_e as f64;
        let diag = kappa + xi.trace();
        OneBodyMatrix::from_upper_fn(self.n, |i, j| {
            let d = if i == j { diag } else { 0.0 };
            self.h_prime.get(i, j) + scale * xi.get(i, j) + d
        })
    }

    /// `G~ - L L^T` as an `N^2 x N^2` matrix, `L` being the factor columns.
    fn residual(&self, params: &Params) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let nn = n * n;
        let mut d = self.g_super.clone();
        let xi = &params.xi;
        for a in 0..nn {
            let (i, j) = (a / n, a % n);
            let x_a = xi.get(i, j);
            for k in 0..n {
                let b = k * n + k;
                d[(a, b)] += 0.5 * x_a;
                d[(b, a)] += 0.5 * x_a;
            }
        }
        let l = params.factors.to_columns();
        if l.ncols() > 0 {
            d.gemm(-1.0, &l, &l.transpose(), 1.0);
        }
        (d, l)
    }

    fn check(&self, params: &Params) -> Result<()> {
        check_dims(self.n, params.n_orbitals())?;
        check_dims(self.n, params.factors.n_orbitals())
    }

    pub fn evaluate(&self, params: &Params, c_approx: f64) -> Result<Cost> {
        self.check(params)?;
        let (d, _) = self.residual(params);
        let err = d.norm_squared();
        let h_tilde = self.shifted_effective_one_body(params.kappa, &params.xi);
        let lambda = lambda_df(&params.factors, &h_tilde)?.lambda_total;
        Ok(Cost {
            total: c_approx * err + lambda,
            err,
            lambda,
        })
    }

    pub fn evaluate_with_gradient(&self, params: &Params, c_approx: f64) -> Result<(Cost, Params)> {
        self.check(params)?;
        let n = self.n;
        let (d, l) = self.residual(params);
        let err = d.norm_squared();

        // dErr/dA_r = -4 (D vec A_r), dErr/dxi = 2 D vec(I)
        let dl = &d * &l;
        let eye = DVector::from_fn(n * n, |a, _| if a / n == a % n { 1.0 } else { 0.0 });
        let d_eye = &d * eye;

        let per_factor: Vec<(f64, DMatrix<f64>)> = params
            .factors
            .factors()
            .par_iter()
            .map(|a| nuclear_norm_subgradient(a.as_matrix()))
            .collect();
        let h_tilde = self.shifted_effective_one_body(params.kappa, &params.xi);
        let (lambda_one, sub_one) = nuclear_norm_subgradient(h_tilde.as_matrix());
        let two_body: f64 = 0.5 * per_factor.iter().map(|(l, _)| l * l).sum::<f64>();
        let lambda = two_body + lambda_one;

        let factor_grads = per_factor
            .iter()
            .enumerate()
            .map(|(r, (norm, sub))| {
                let g = DMatrix::from_fn(n, n, |i, j| -4.0 * c_approx * dl[(i * n + j, r)] + norm * sub[(i, j)]);
                fold_symmetric(&g)
            })
            .collect();

        let tr_sub = sub_one.trace();
        let scale = n as f64 - self.n_e as f64;
        let xi_grad = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { tr_sub } else { 0.0 };
            2.0 * c_approx * d_eye[i * n + j] + scale * sub_one[(i, j)] + diag
        });

        let grad = Params {
            kappa: tr_sub,
            xi: fold_symmetric(&xi_grad),
            factors: FactorSet::new(n, factor_grads)?,
        };
        Ok((
            Cost {
                total: c_approx * err + lambda,
                err,
                lambda,
            },
            grad,
        ))
    }
}

/// `(C Err + lambda, Err, lambda)` for the shifted Hamiltonian.
pub fn total_cost(ham: &Hamiltonian, params: &Params, c_approx: f64) -> Result<Cost> {
    Objective::new(ham).evaluate(params, c_approx)
}

/// Analytic (sub)gradient of [`total_cost`].
pub fn gradient(ham: &Hamiltonian, params: &Params, c_approx: f64) -> Result<Params> {
    Ok(Objective::new(ham).evaluate_with_gradient(params, c_approx)?.1)
}

/// Which parameter groups the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamMask {
    pub kappa: bool,
    pub xi: bool,
    pub factors: bool,
}

impl ParamMask {
    pub const ALL: ParamMask = ParamMask {
        kappa: true,
        xi: true,
        factors: true,
    };

    fn apply(&self, n: usize, grad: &mut [f64]) {
        let p = packed_len(n);
        if !self.kappa {
            grad[0] = 0.0;
        }
        if !self.xi {
            grad[1..1 + p].fill(0.0);
        }
        if !self.factors {
            grad[1 + p..].fill(0.0);
        }
    }
}

impl Default for ParamMask {
    fn default() -> Self {
        Self::ALL
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(cfg: &OptimizationConfig, len: usize) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_epsilon,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((xi, &g), (m, v)) in x.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *xi -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub total: f64,
    pub err: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub best_params: Params,
    /// Trace index of `best_params`; 0 is the initial double factorization.
    pub best_iter: usize,
    pub lambda_breakdown: LambdaBreakdown,
    pub err_final: f64,
    pub lambda_init: f64,
    pub err_init: f64,
    pub c_approx: f64,
    pub total_trace: Vec<TraceEntry>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    /// `err_final <= err_init + err_budget`.
    pub feasible: bool,
}

/// A stalled patience window halves the learning rate; the run stops after
/// the window stalls with the rate already halved this many times.
pub const MAX_LR_HALVINGS: u32 = 8;

/// Scale of the noise placed on factors that start at exactly zero, relative
/// to the RMS entry of the nonzero factors. Zero factors have zero gradient
/// and would otherwise never move.
const ZERO_FACTOR_NOISE: f64 = 1e-3;

fn seed_zero_factors(x: &mut [f64], n: usize, rank: usize, seed: u64) {
    let p = packed_len(n);
    let blocks = &mut x[1 + p..];
    let nonzero: Vec<f64> = blocks.iter().copied().filter(|v| *v != 0.0).collect();
    let rms = if nonzero.is_empty() {
        1.0
    } else {
        (nonzero.iter().map(|v| v * v).sum::<f64>() / nonzero.len() as f64).sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..rank {
        let block = &mut blocks[r * p..(r + 1) * p];
        if block.iter().all(|v| *v == 0.0) {
            for v in block.iter_mut() {
                *v = ZERO_FACTOR_NOISE * rms * rng.random_range(-1.0..1.0);
            }
        }
    }
}

pub fn optimize(ham: &Hamiltonian, rank: usize, cfg: &OptimizationConfig) -> Result<OptimizationReport> {
    optimize_masked(ham, rank, cfg, ParamMask::ALL)
}

/// Adam descent on `Total` starting from the standard double factorization.
///
/// The returned point minimizes `Total` over all visited iterates whose
/// `lambda` does not exceed the initial `lambda`; the initial point itself is
/// always a candidate.
pub fn optimize_masked(
    ham: &Hamiltonian,
    rank: usize,
    cfg: &OptimizationConfig,
    mask: ParamMask,
) -> Result<OptimizationReport> {
    cfg.validate()?;
    let n = ham.n_orbitals();
    let objective = Objective::new(ham);
    let init = Params::initial(ham, rank)?;
    let init_cost = objective.evaluate(&init, 0.0)?;
    let c_approx = cfg
        .c_approx
        .unwrap_or_else(|| default_c_approx(init_cost.lambda, init_cost.err));
    let init_total = c_approx * init_cost.err + init_cost.lambda;
    if !init_total.is_finite() {
        return Err(Error::NonFiniteCost { iter: 0 });
    }

    let mut trace = vec![TraceEntry {
        iter: 0,
        total: init_total,
        err: init_cost.err,
        lambda: init_cost.lambda,
    }];
    let mut best_total_history = vec![init_total];
    let mut best = (0usize, init.clone(), init_total);

    let mut x = init.pack();
    if mask.factors {
        seed_zero_factors(&mut x, n, rank, cfg.seed);
    }
    let mut adam = Adam::new(cfg, x.len());
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations_run = 0;
    let mut lr_halvings = 0;
    let mut window_start = 0;

    for iter in 1..=cfg.max_iters {
        let params = Params::unpack(n, rank, &x)?;
        let (cost, grad) = objective.evaluate_with_gradient(&params, c_approx)?;
        if !(cost.total.is_finite() && cost.err.is_finite() && cost.lambda.is_finite()) {
            return Err(Error::NonFiniteCost { iter });
        }
        iterations_run = iter;
        trace.push(TraceEntry {
            iter,
            total: cost.total,
            err: cost.err,
            lambda: cost.lambda,
        });
        if cost.lambda <= init_cost.lambda && cost.total < best.2 {
            best = (iter, params, cost.total);
        }
        best_total_history.push(best.2);

        if iter >= window_start + cfg.patience {
            let past = best_total_history[iter - cfg.patience];
            if past - best.2 <= cfg.rel_tol * past.abs() {
                if lr_halvings == MAX_LR_HALVINGS {
                    stop_reason = StopReason::Converged;
                    break;
                }
                lr_halvings += 1;
                adam.lr *= 0.5;
                window_start = iter;
            }
        }

        let mut g = grad.pack();
        mask.apply(n, &mut g);
        adam.step(&mut x, &g);
    }

    let (best_iter, best_params, _) = best;
    let shifted = apply_symmetry_shift(ham, &best_params.shift(ham.n_electrons))?;
    let err_final = frobenius_error(&shifted.g, &best_params.factors)?;
    let lambda_breakdown = lambda_df(&best_params.factors, &effective_one_body(&shifted))?;
    Ok(OptimizationReport {
        feasible: err_final <= init_cost.err + cfg.err_budget,
        best_params,
        best_iter,
        lambda_breakdown,
        err_final,
        lambda_init: init_cost.lambda,
        err_init: init_cost.err,
        c_approx,
        total_trace: trace,
        iterations_run,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Hamiltonian {
        let a = OneBodyMatrix::from_upper_fn(n, |i, j| 0.4 / (1.0 + i as f64 + j as f64));
        let b = OneBodyMatrix::from_upper_fn(n, |i, j| if i == j { 0.2 * i as f64 } else { 0.05 });
        let f = FactorSet::new(n, vec![a, b]).unwrap();
        let g = crate::factorization::reconstruct_two_body(&f);
        let h = OneBodyMatrix::from_upper_fn(n, |i, j| if i == j { 1.0 + i as f64 } else { -0.1 });
        Hamiltonian::new(h, g, 0.0, n).unwrap()
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(OptimizationConfig::from_json(r#"{"learning_rat": 0.1}"#).is_err());
        let cfg = OptimizationConfig::from_json(r#"{"learning_rate": 0.01, "seed": 7}"#).unwrap();
        assert_eq!(cfg.learning_rate, 0.01);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.max_iters, 10_000);
        assert!(OptimizationConfig::from_json(r#"{"adam_beta1": 1.0}"#).is_err());
        assert!(OptimizationConfig::from_json(r#"{"learning_rate": 0}"#).is_err());
    }

    #[test]
    fn default_c_approx_clamps() {
        assert_eq!(default_c_approx(10.0, 0.0), 1e9);
        assert_eq!(default_c_approx(1.0, 100.0), 1e2);
        assert_eq!(default_c_approx(2.0, 1.0), 2e3);
    }

    #[test]
    fn pack_roundtrip() {
        let ham = toy(3);
        let mut p = Params::initial(&ham, 4).unwrap();
        p.kappa = 0.3;
        p.xi = OneBodyMatrix::from_upper_fn(3, |i, j| (i * 3 + j) as f64);
        let q = Params::unpack(3, 4, &p.pack()).unwrap();
        assert_eq!(p, q);
        assert!(Params::unpack(3, 4, &p.pack()[1..]).is_err());
    }

    #[test]
    fn zero_factor_has_zero_lambda_gradient() {
        let ham = toy(3);
        let params = Params {
            kappa: 0.1,
            xi: OneBodyMatrix::zeros(3),
            factors: FactorSet::new(3, vec![OneBodyMatrix::zeros(3)]).unwrap(),
        };
        // c_approx = 0 isolates the lambda part
        let grad = gradient(&ham, &params, 0.0).unwrap();
        assert!(grad.factors.factors()[0].as_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn err_gradient_vanishes_at_exact_factorization() {
        let ham = toy(3);
        let params = Params::initial(&ham, 9).unwrap();
        let with_err = gradient(&ham, &params, 1.0).unwrap();
        let without = gradient(&ham, &params, 0.0).unwrap();
        let a = with_err.pack();
        let b = without.pack();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ham = toy(3);
        let params = Params {
            kappa: 0.0,
            xi: OneBodyMatrix::zeros(2),
            factors: FactorSet::empty(2),
        };
        assert!(matches!(total_cost(&ham, &params, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_factor_cost() {
        let ham = toy(3);
        let params = Params {
            kappa: 0.0,
            xi: OneBodyMatrix::zeros(3),
            factors: FactorSet::empty(3),
        };
        let cost = total_cost(&ham, &params, 2.0).unwrap();
        assert!((cost.err - ham.g.frobenius_norm_sq()).abs() < 1e-14);
        let hp = effective_one_body(&ham);
        assert!((cost.lambda - crate::factorization::nuclear_norm(&hp)).abs() < 1e-13);
        assert_eq!(cost.total, 2.0 * cost.err + cost.lambda);
    }

    #[test]
    fn optimize_rejects_bad_rank() {
        let ham = toy(2);
        assert!(optimize(&ham, 0, &OptimizationConfig::default()).is_err());
    }
}
