//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 when input fails validation, 3 when a
//! numerical check misses its tolerance.

mod demo;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dsl::{lower_map, parse_map, parse_polynomial, parse_state};
use crate::error::{Error, Result};
use crate::fock::{FockContext, DEFAULT_CUTOFF};
use crate::hilbert::CVector;
use crate::positivity::{min_eigenvalue, moment_matrix, scan_min_eigenvalue, search_violation, PSD_TOL};
use crate::states::{clustering_deviation, evaluate, invariance_deviation};
use crate::tomography::{invert_mixture, read_samples_csv, s2_grid};
use crate::weyl::{automorphism_image, commutator, WeylPolynomial};

pub use demo::{run_demo, DemoSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Tolerance of the `fock-check` comparison table.
pub const FOCK_CHECK_TOL: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "weyl-lab", version, about = "States on CCR algebras: evaluation, positivity, Fock checks, tomography")]
struct Cli {
    /// Report errors as JSON objects on stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a state on a Weyl polynomial.
    Eval {
        #[arg(long)]
        state: String,
        #[arg(long)]
        expr: String,
    },
    /// Moment-matrix eigenvalues on given points, or a seeded violation search.
    Positivity {
        #[arg(long)]
        state: String,
        /// JSON array of vectors.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Seed for a randomized search.
        #[arg(long)]
        search: Option<u64>,
        #[arg(long, default_value_t = 4)]
        n_points: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Largest deviation of a state under a map, over test expressions (one per line).
    Invariance {
        #[arg(long)]
        state: String,
        #[arg(long)]
        map: String,
        #[arg(long)]
        tests: PathBuf,
    },
    /// `|ω(ρ_{g_n}(a) b) − ω(a) ω(b)|`.
    Clustering {
        #[arg(long)]
        state: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        n: u32,
    },
    /// Thermal density matrix versus the closed-form characteristic function.
    FockCheck {
        #[arg(long)]
        s2: f64,
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: usize,
        /// Number of |z| values in [0, 1].
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Recover a mixing measure from (t, value) samples.
    Invert {
        #[arg(long)]
        csv: PathBuf,
        /// Grid `a:b:step` of variances.
        #[arg(long, default_value = "1:8:0.05")]
        grid: String,
        #[arg(long, default_value_t = 1.0)]
        x_norm: f64,
        #[arg(long, default_value_t = 0.0)]
        reg: f64,
    },
    /// Regenerate every experiment table.
    Demo {
        #[arg(long)]
        seed: u64,
        /// Output directory; defaults to $WEYL_LAB_OUT, then ./out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            report(&e, cli.json, err);
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotHermitian { .. } | Error::NotUnitary { .. } => EXIT_TOLERANCE,
        _ => EXIT_INVALID,
    }
}

/// `{"error": kind, "message": text}` plus the position of syntax errors.
pub fn error_json(e: &Error) -> Value {
    let mut v = json!({ "error": e.kind(), "message": e.to_string() });
    match e {
        Error::Syntax { line, column, token, .. } => {
            v["line"] = json!(line);
            v["column"] = json!(column);
            v["token"] = json!(token);
        }
        Error::Arity { line, column, .. } => {
            v["line"] = json!(line);
            v["column"] = json!(column);
        }
        _ => {}
    }
    v
}

fn report(e: &Error, as_json: bool, err: &mut dyn Write) {
    let _ = if as_json {
        writeln!(err, "{}", error_json(e))
    } else {
        writeln!(err, "error: {e}")
    };
}

/// Pretty JSON with object keys in sorted order.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&serde_json::to_value(v)?)?)
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Eval { state, expr } => {
            let s = parse_state(&state)?;
            let value = evaluate(&s, &parse_polynomial(&expr)?)?;
            emit(out, &complex_json(value))?;
        }
        Command::Positivity { state, points, search, n_points, trials } => {
            let s = parse_state(&state)?;
            match (points, search) {
                (Some(path), None) => {
                    let pts: Vec<CVector> = serde_json::from_str(&fs::read_to_string(path)?)?;
                    let m = moment_matrix(&s, &pts)?;
                    let min_eig = min_eigenvalue(&m)?;
                    let mut v = serde_json::to_value(&m)?;
                    v["min_eig"] = json!(min_eig);
                    v["psd"] = json!(min_eig >= PSD_TOL);
                    emit(out, &v)?;
                }
                (None, Some(seed)) => match search_violation(&s, n_points, trials, seed)? {
                    Some(w) => emit(out, &serde_json::to_value(&w)?)?,
                    None => {
                        let min_eig = scan_min_eigenvalue(&s, n_points, trials, seed)?;
                        emit(out, &json!({ "min_eig": min_eig, "trials": trials, "witness": null }))?;
                    }
                },
                _ => return Err(Error::Domain("give exactly one of --points FILE or --search SEED".into())),
            }
        }
        Command::Invariance { state, map, tests } => {
            let s = parse_state(&state)?;
            let u = lower_map(&parse_map(&map)?)?;
            let polys = read_expressions(&fs::read_to_string(tests)?)?;
            let d = invariance_deviation(&s, &u, &polys)?;
            emit(out, &json!({ "max_deviation": d, "tests": polys.len() }))?;
        }
        Command::Clustering { state, a, b, n } => {
            if !(1..=62).contains(&n) {
                return Err(Error::Domain(format!("n must be in [1, 62], got {n}")));
            }
            let s = parse_state(&state)?;
            let (a, b) = (parse_polynomial(&a)?, parse_polynomial(&b)?);
            let moved = automorphism_image(&crate::hilbert::build_g_n(n), &a);
            let commutes = commutator(&moved, &b)?.is_zero();
            let d = clustering_deviation(&s, &a, &b, n)?;
            emit(out, &json!({ "commutator_zero": commutes, "deviation": d }))?;
        }
        Command::FockCheck { s2, cutoff, steps } => {
            let rows = fock_check(s2, cutoff, steps)?;
            let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["z", "trace", "exact", "abs_err"])?;
            for (z, tr, exact, e) in &rows {
                w.write_record([z.to_string(), tr.to_string(), exact.to_string(), e.to_string()])?;
            }
            w.flush()?;
            if worst > FOCK_CHECK_TOL {
                return Ok(EXIT_TOLERANCE);
            }
        }
        Command::Invert { csv, grid, x_norm, reg } => {
            let samples = read_samples_csv(fs::File::open(csv)?)?;
            let (grid, step) = parse_grid(&grid)?;
            let mu = invert_mixture(&samples, x_norm, &grid, reg)?;
            let mut v = serde_json::to_value(&mu)?;
            v["clusters"] = serde_json::to_value(mu.clusters(1.5 * step, 1e-6))?;
            emit(out, &v)?;
        }
        Command::Demo { seed, out: dir } => {
            let dir = dir
                .or_else(|| std::env::var_os("WEYL_LAB_OUT").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let summary = run_demo(seed, &dir)?;
            for (name, pass) in &summary.criteria {
                writeln!(out, "{} {name}", if *pass { "PASS" } else { "FAIL" })?;
            }
            if !summary.all_pass() {
                return Ok(EXIT_TOLERANCE);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Rows `(|z|, Tr(T W(z e_0)), e^{−s2 |z|²/2}, error)` for `|z|` in `[0, 1]`.
pub fn fock_check(s2: f64, cutoff: usize, steps: usize) -> Result<Vec<(f64, f64, f64, f64)>> {
    if steps < 2 {
        return Err(Error::Domain("steps must be at least 2".into()));
    }
    let ctx = FockContext::single_mode(cutoff)?;
    let rho = ctx.thermal_density(s2)?;
    (0..steps)
        .map(|i| {
            let z = i as f64 / (steps - 1) as f64;
            let w = WeylPolynomial::generator(CVector::basis(0).scale(Complex64::new(z, 0.0)));
            let tr = ctx.state_expectation(&rho, &w)?;
            let exact = (-0.5 * s2 * z * z).exp();
            Ok((z, tr.re, exact, (tr - exact).norm()))
        })
        .collect()
}

/// `a:b:step`, returning the grid and its step.
pub fn parse_grid(spec: &str) -> Result<(Vec<f64>, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Domain(format!("grid must look like a:b:step, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    Ok((s2_grid(nums[0], nums[1], nums[2])?, nums[2]))
}

/// One expression per line; blank lines and lines starting with `#` are skipped.
pub fn read_expressions(text: &str) -> Result<Vec<WeylPolynomial>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_polynomial)
        .collect()
}
