use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dfshift::archive::{decode, encode, sha256_hex};
use dfshift::{
    effective_one_body, frobenius_error, initial_double_factorization, lambda_df, Fcidump, Fault, FactorSet,
    Hamiltonian, Level, OptimizationConfig, INTEGRAL_CONVENTION,
};

use crate::error::{io_error, CliError};
use crate::output::*;

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct Input {
    path: PathBuf,
    sha256: String,
    ham: Hamiltonian,
}

fn load_input(path: &Path) -> Result<Input, CliError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{}: not valid UTF-8", path.display())))?;
    let dump = Fcidump::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Input {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        ham: dump.to_hamiltonian()?,
    })
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| io_error(out, e))
}

/// Writes the archive and returns the checksum of its data section.
fn write_factors(out: &Path, factors: &FactorSet, source_sha256: &str) -> Result<String, CliError> {
    let bytes = encode(factors, Some(source_sha256));
    let (_, manifest) = decode(&bytes)?;
    let path = out.join(ARCHIVE_FILE);
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    Ok(manifest.data_sha256)
}

fn check_rank(rank: usize, n: usize) -> Result<(), CliError> {
    if rank == 0 || rank > n * n {
        return Err(CliError::Input(format!("rank {rank} must lie in 1..={}", n * n)));
    }
    Ok(())
}

pub fn factorize(input: &Path, rank: usize, out: &Path) -> Result<(), CliError> {
    let started = now_unix();
    let inp = load_input(input)?;
    let n = inp.ham.n_orbitals();
    check_rank(rank, n)?;
    let factors = initial_double_factorization(&inp.ham.g, rank)?;
    let breakdown = lambda_df(&factors, &effective_one_body(&inp.ham))?;
    let err = frobenius_error(&inp.ham.g, &factors)?;
    prepare_out(out)?;
    let data_sha = write_factors(out, &factors, &inp.sha256)?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        manifest: MANIFEST_FILE,
        input_sha256: inp.sha256.clone(),
        integral_convention: INTEGRAL_CONVENTION,
        n,
        r: rank,
        lambda_df: breakdown.lambda_total,
        err,
        per_factor: breakdown.per_factor.clone(),
        runs: vec![RunRow {
            method: "XDF".into(),
            n,
            r: rank,
            lambda: breakdown.lambda_total,
            err,
        }],
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    write_manifest(out, "factorize", &inp, rank, None, data_sha, started)?;
    println!("lambda_df {:.12e} err {:.3e}", breakdown.lambda_total, err);
    Ok(())
}

fn write_manifest(
    out: &Path,
    command: &'static str,
    inp: &Input,
    rank: usize,
    config: Option<OptimizationConfig>,
    archive_data_sha256: String,
    started: f64,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command,
        input_path: inp.path.display().to_string(),
        input_checksum: inp.sha256.clone(),
        r: rank,
        config,
        archive: ARCHIVE_FILE.into(),
        archive_data_sha256,
        tool_version: env!("CARGO_PKG_VERSION"),
        platform: platform(),
        started_unix: started,
        finished_unix: now_unix(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<OptimizationConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            OptimizationConfig::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
        }
        None => OptimizationConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn optimize(input: &Path, rank: usize, cfg: OptimizationConfig, out: &Path) -> Result<(), CliError> {
    let started = now_unix();
    let inp = load_input(input)?;
    let n = inp.ham.n_orbitals();
    check_rank(rank, n)?;
    let rep = dfshift::optimize(&inp.ham, rank, &cfg)?;
    prepare_out(out)?;
    let data_sha = write_factors(out, &rep.best_params.factors, &inp.sha256)?;

    let trace_path = out.join(TRACE_FILE);
    let mut trace = Vec::new();
    for t in &rep.total_trace {
        serde_json::to_writer(&mut trace, t).expect("trace serializes");
        trace.push(b'\n');
    }
    fs::write(&trace_path, trace).map_err(|e| io_error(&trace_path, e))?;

    let report = OptimizeReport {
        schema_version: SCHEMA_VERSION,
        manifest: MANIFEST_FILE,
        input_sha256: inp.sha256.clone(),
        integral_convention: INTEGRAL_CONVENTION,
        n,
        r: rank,
        n_electrons: inp.ham.n_electrons,
        kappa: rep.best_params.kappa,
        xi: rep.best_params.xi.clone(),
        lambda_breakdown: rep.lambda_breakdown.clone(),
        err_final: rep.err_final,
        lambda_init: rep.lambda_init,
        err_init: rep.err_init,
        err_budget: cfg.err_budget,
        feasible: rep.feasible,
        c_approx: rep.c_approx,
        iterations_run: rep.iterations_run,
        best_iter: rep.best_iter,
        stop_reason: rep.stop_reason,
        runs: vec![
            RunRow {
                method: "XDF".into(),
                n,
                r: rank,
                lambda: rep.lambda_init,
                err: rep.err_init,
            },
            RunRow {
                method: "optimized".into(),
                n,
                r: rank,
                lambda: rep.lambda_breakdown.lambda_total,
                err: rep.err_final,
            },
        ],
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    write_manifest(out, "optimize", &inp, rank, Some(cfg.clone()), data_sha, started)?;
    println!(
        "lambda {:.12e} err {:.3e} iterations {}",
        rep.lambda_breakdown.lambda_total, rep.err_final, rep.iterations_run
    );
    if !rep.feasible {
        eprintln!(
            "warning: err {:.3e} exceeds initial err {:.3e} by more than err_budget {:.1e}",
            rep.err_final, rep.err_init, cfg.err_budget
        );
    }
    Ok(())
}

pub fn verify(level: Level, fault: Option<Fault>) -> Result<(), CliError> {
    let report = dfshift::run_suite(level, fault)?;
    let mut stdout = std::io::stdout().lock();
    for c in &report.checks {
        let tag = if c.passed { "ok" } else { "FAILED" };
        let _ = writeln!(
            stdout,
            "{tag:<6} {:<28} max deviation {:.2e} (tolerance {:.0e})",
            c.name, c.max_deviation, c.tolerance
        );
    }
    let failed: Vec<String> = report
        .failures()
        .map(|c| format!("{} (max deviation {:.2e})", c.name, c.max_deviation))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("verification failed: {}", failed.join(", "))))
    }
}

pub fn report(path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CliError::Input(format!("{}: missing schema_version", path.display())))?;
    if version > SCHEMA_VERSION as u64 {
        return Err(CliError::Input(format!(
            "{}: schema version {version} is newer than supported version {SCHEMA_VERSION}",
            path.display()
        )));
    }
    let table: RunTable = serde_json::from_value(value)
        .map_err(|e| CliError::Input(format!("{}: schema mismatch: {e}", path.display())))?;
    print!("{}", render_table(&table.runs));
    Ok(())
}

pub fn render_table(rows: &[RunRow]) -> String {
    let mut s = format!("{:<12} {:>4} {:>5} {:>16} {:>12}\n", "method", "N", "R", "lambda", "error");
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:>4} {:>5} {:>16.6} {:>12.3e}\n",
            r.method, r.n, r.r, r.lambda, r.err
        ));
    }
    s
}
