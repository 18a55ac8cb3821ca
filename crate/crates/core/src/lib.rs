pub mod archive;
pub mod error;
pub mod factorization;
pub mod fcidump;
pub mod hamiltonian;
pub mod optimizer;
pub mod oracle;
pub mod verify;

pub use archive::{read_archive, sha256_file, write_archive, ArchiveManifest};
pub use error::{Error, FcidumpError, Result};
pub use factorization::{
    eigen_rank1, frobenius_error, initial_double_factorization, lambda_df, nuclear_norm, reconstruct_two_body, FactorSet,
    LambdaBreakdown, Rank1Decomposition,
};
pub use fcidump::{load_integrals, write_integrals, Fcidump, INTEGRAL_CONVENTION};
pub use hamiltonian::{apply_symmetry_shift, effective_one_body, Hamiltonian, OneBodyMatrix, ShiftParams, TwoBodyTensor};
pub use optimizer::{
    gradient, optimize, optimize_masked, total_cost, Cost, Objective, OptimizationConfig, OptimizationReport, ParamMask,
    Params, StopReason, TraceEntry,
};
pub use oracle::{build_hamiltonian_dense, sector_eigenvalues, DenseOperator, Spin};
pub use verify::{run_suite, CheckResult, Fault, Level, VerifyReport};
