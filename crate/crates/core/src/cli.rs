//! `polyflow` command line: `solve`, `check` and `bench`.
//!
//! Coefficients are always given as `c_1, ..., c_N` of the monic polynomial
//! `z^N + c_1 z^(N-1) + ... + c_N`, i.e. descending powers with the leading
//! 1 left out.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, instance_rng, unit_disc_polynomial};
use crate::integrator::IntegratorConfig;
use crate::oracle::durand_kerner;
use crate::poly::{coeffs_from_roots, ComplexScalar, MonicPolynomial, RootConfiguration};
use crate::solver::{match_root_sets, solve, SolveError, SolveReport, SolveWarning, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_SOLUTION: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub const SEED_ENV: &str = "POLYFLOW_SEED";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse complex number from {token:?}")]
pub struct ParseComplexError {
    pub token: String,
}

fn parse_real(token: &str) -> Option<f64> {
    // digits, optional fraction, optional exponent; no inf/nan spellings
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(k) => (&body[..k], Some(&body[k + 1..])),
        None => (body, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) {
        return None;
    }
    if let Some(e) = exponent {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        if e.is_empty() || !digits(e) {
            return None;
        }
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses `1`, `-2.5i`, `3+4i`, `1e-3-2e2i`, `i`, `-i`. Whitespace is ignored.
pub fn parse_complex(text: &str) -> Result<ComplexScalar, ParseComplexError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let fail = || ParseComplexError {
        token: text.trim().to_string(),
    };
    if s.is_empty() {
        return Err(fail());
    }
    let Some(body) = s.strip_suffix('i') else {
        return parse_real(&s).map(|re| ComplexScalar::new(re, 0.0)).ok_or_else(fail);
    };
    // the imaginary part starts at the last sign that is not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re_part, im_part) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        parse_real(re_part).ok_or_else(fail)?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => parse_real(other).ok_or_else(fail)?,
    };
    Ok(ComplexScalar::new(re, im))
}

/// Comma-separated complex literals.
pub fn parse_complex_list(text: &str) -> Result<Vec<ComplexScalar>, ParseComplexError> {
    text.split(',').map(parse_complex).collect()
}

#[derive(Debug, Parser)]
#[command(name = "polyflow", version, about = "All zeros of a monic complex polynomial via the root-flow ODE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute all zeros of one polynomial.
    Solve(SolveArgs),
    /// Run the invariant suite and print a pass/fail table.
    Check {
        #[arg(long)]
        seed: Option<u64>,
        /// Instances per degree.
        #[arg(long, default_value_t = 5)]
        instances: usize,
    },
    /// Time the solver on random unit-disc polynomials.
    Bench {
        /// Inclusive degree range, e.g. `2..20`.
        #[arg(long, default_value = "2..20")]
        degrees: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        starts: usize,
    },
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("polynomial").required(true).args(["coeffs", "roots", "input"])))]
struct SolveArgs {
    /// Coefficients c_1..c_N, descending powers after the leading z^N.
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    /// Zeros; the polynomial is built from them.
    #[arg(long, allow_hyphen_values = true)]
    roots: Option<String>,
    /// JSON file `{"coeffs": [...]}` or `{"roots": [...]}`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Leading coefficient of a non-monic `--coeffs` polynomial.
    #[arg(long, allow_hyphen_values = true)]
    leading: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    starts: usize,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long, default_value_t = 5)]
    max_restarts: usize,
    #[arg(long)]
    no_polish: bool,
    /// Write `t,n,re,im` rows of the reported start.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
}

/// Contents of an `--input` file. Exactly one of `coeffs` / `roots`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub coeffs: Option<Vec<String>>,
    pub roots: Option<Vec<String>>,
    pub leading: Option<String>,
}

/// A polynomial as specified on the command line or in an input file.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Coeffs {
        coeffs: Vec<ComplexScalar>,
        leading: Option<ComplexScalar>,
    },
    Roots(Vec<ComplexScalar>),
}

impl InputSpec {
    pub fn into_polynomial(self) -> Result<MonicPolynomial, String> {
        match self {
            InputSpec::Coeffs { coeffs, leading } => match leading {
                Some(lead) => MonicPolynomial::from_non_monic(lead, &coeffs),
                None => MonicPolynomial::new(coeffs),
            }
            .map_err(|e| e.to_string()),
            InputSpec::Roots(roots) => RootConfiguration::new(roots)
                .map(|r| coeffs_from_roots(&r))
                .map_err(|e| e.to_string()),
        }
    }
}

impl InputFile {
    pub fn into_spec(self) -> Result<InputSpec, String> {
        let parse = |v: Vec<String>| -> Result<Vec<ComplexScalar>, String> {
            v.iter().map(|s| parse_complex(s).map_err(|e| e.to_string())).collect()
        };
        let leading = self
            .leading
            .as_deref()
            .map(parse_complex)
            .transpose()
            .map_err(|e| e.to_string())?;
        match (self.coeffs, self.roots) {
            (Some(c), None) => Ok(InputSpec::Coeffs {
                coeffs: parse(c)?,
                leading,
            }),
            (None, Some(r)) if leading.is_none() => Ok(InputSpec::Roots(parse(r)?)),
            (None, Some(_)) => Err("\"leading\" only applies to \"coeffs\"".into()),
            _ => Err("input file needs exactly one of \"coeffs\" or \"roots\"".into()),
        }
    }
}

#[derive(Debug, Serialize)]
struct JsonComplex {
    re: f64,
    im: f64,
}

impl From<ComplexScalar> for JsonComplex {
    fn from(z: ComplexScalar) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JsonWarning {
    NearMultipleRoot {
        indices: Vec<usize>,
        center: JsonComplex,
        spread: f64,
    },
    RelaxedTolerance {
        indices: Vec<usize>,
        tolerance: f64,
    },
    FlatDerivative {
        index: usize,
    },
    StartFailed {
        start: usize,
        reason: String,
    },
}

impl From<&SolveWarning> for JsonWarning {
    fn from(w: &SolveWarning) -> Self {
        match w {
            SolveWarning::NearMultipleRoot {
                indices,
                center,
                spread,
            } => JsonWarning::NearMultipleRoot {
                indices: indices.clone(),
                center: (*center).into(),
                spread: *spread,
            },
            SolveWarning::RelaxedTolerance { indices, tolerance } => JsonWarning::RelaxedTolerance {
                indices: indices.clone(),
                tolerance: *tolerance,
            },
            SolveWarning::FlatDerivative { index } => JsonWarning::FlatDerivative { index: *index },
            SolveWarning::StartFailed { start, failure } => JsonWarning::StartFailed {
                start: *start,
                reason: failure.to_string(),
            },
        }
    }
}

/// The stable `solve` output document.
#[derive(Debug, Serialize)]
struct JsonReport {
    degree: usize,
    roots: Vec<JsonComplex>,
    residuals: Vec<f64>,
    restarts: usize,
    starts: usize,
    consensus_discrepancy: f64,
    warnings: Vec<JsonWarning>,
    pre_polish_residuals: Vec<f64>,
}

impl From<&SolveReport> for JsonReport {
    fn from(r: &SolveReport) -> Self {
        Self {
            degree: r.roots.len(),
            roots: r.roots.iter().map(|&z| z.into()).collect(),
            residuals: r.residuals.clone(),
            restarts: r.restarts_used,
            starts: r.starts_used,
            consensus_discrepancy: r.consensus_discrepancy,
            warnings: r.warnings.iter().map(JsonWarning::from).collect(),
            pre_polish_residuals: r.pre_polish_residuals.clone(),
        }
    }
}

fn format_complex(z: ComplexScalar) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn render_report(report: &SolveReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&JsonReport::from(report)).expect("serializable");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::from("index,re,im,residual,pre_polish_residual\n");
            for (i, z) in report.roots.iter().enumerate() {
                s += &format!(
                    "{i},{},{},{},{}\n",
                    z.re, z.im, report.residuals[i], report.pre_polish_residuals[i]
                );
            }
            s
        }
        OutputFormat::Plain => {
            let mut s = format!("degree {}\n", report.roots.len());
            for (i, z) in report.roots.iter().enumerate() {
                s += &format!(
                    "x[{i}] = {}  residual {:.3e}\n",
                    format_complex(*z),
                    report.residuals[i]
                );
            }
            s += &format!(
                "starts {}  restarts {}  consensus {:.3e}\n",
                report.starts_used, report.restarts_used, report.consensus_discrepancy
            );
            for w in &report.warnings {
                s += &format!("warning: {w:?}\n");
            }
            s
        }
    }
}

/// `t,n,re,im`, sorted by `(t, n)`.
pub fn render_trajectory(report: &SolveReport) -> String {
    let mut s = String::from("t,n,re,im\n");
    if let Some(traj) = &report.trajectory {
        for state in &traj.samples {
            for (n, z) in state.y.iter().enumerate() {
                s += &format!("{},{n},{},{}\n", state.t, z.re, z.im);
            }
        }
    }
    s
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

fn read_input(args: &SolveArgs) -> Result<MonicPolynomial, String> {
    let leading = args
        .leading
        .as_deref()
        .map(parse_complex)
        .transpose()
        .map_err(|e| e.to_string())?;
    let spec = match (&args.coeffs, &args.roots, &args.input) {
        (Some(c), None, None) => InputSpec::Coeffs {
            coeffs: parse_complex_list(c).map_err(|e| e.to_string())?,
            leading,
        },
        (None, Some(r), None) if leading.is_none() => {
            InputSpec::Roots(parse_complex_list(r).map_err(|e| e.to_string())?)
        }
        (None, None, Some(path)) if leading.is_none() => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let file: InputFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            file.into_spec()?
        }
        _ => return Err("--leading only applies to --coeffs".into()),
    };
    spec.into_polynomial()
}

fn run_solve(args: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let input = read_input(&args).and_then(|p| resolve_seed(args.seed).map(|s| (p, s)));
    let (target, seed) = match input {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let defaults = IntegratorConfig::default();
    let cfg = SolverConfig {
        seed,
        num_starts: args.starts,
        max_restarts_per_start: args.max_restarts,
        polish: !args.no_polish,
        record_trajectory: args.trajectory.is_some(),
        integrator: IntegratorConfig {
            rtol: args.rtol.unwrap_or(defaults.rtol),
            atol: args.atol.unwrap_or(defaults.atol),
            ..defaults
        },
        ..Default::default()
    };

    let (report, code) = match solve(&target, &cfg) {
        Ok(r) => (r, EXIT_OK),
        Err(SolveError::ResidualTooLarge {
            report,
            offending,
            worst,
        }) => {
            let _ = writeln!(
                err,
                "error: {} zero(s) above the residual tolerance (worst {worst:e})",
                offending.len()
            );
            (*report, EXIT_NO_SOLUTION)
        }
        Err(e @ SolveError::NoConvergence { .. }) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_NO_SOLUTION;
        }
        Err(e @ (SolveError::InvalidConfig(_) | SolveError::InvalidInitialData(_))) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
        Err(e @ SolveError::Internal(_)) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INTERNAL;
        }
    };

    if let Some(path) = &args.trajectory {
        if let Err(e) = fs::write(path, render_trajectory(&report)) {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_INTERNAL;
        }
    }
    let _ = out.write_all(render_report(&report, args.output).as_bytes());
    code
}

fn run_check(seed: Option<u64>, instances: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let seed = match resolve_seed(seed) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let rows = diagnostics::run_checks(seed, instances);
    let _ = writeln!(
        out,
        "{:<32} {:>9} {:>12} {:>10} {:>8}  result",
        "check", "instances", "worst", "threshold", "failures"
    );
    for row in &rows {
        let _ = writeln!(
            out,
            "{:<32} {:>9} {:>12.3e} {:>10.1e} {:>8}  {}",
            row.name,
            row.instances,
            row.worst,
            row.threshold,
            row.failures,
            if row.passed() { "PASS" } else { "FAIL" }
        );
    }
    if rows.iter().all(|r| r.passed()) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Parses `a..b` (inclusive) or a single degree.
pub fn parse_degree_range(text: &str) -> Result<(usize, usize), String> {
    let bad = || format!("invalid degree range {text:?}, expected e.g. 2..20");
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (text.trim(), text.trim()),
    };
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if a < 1 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

fn run_bench(
    degrees: &str,
    trials: usize,
    seed: Option<u64>,
    starts: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if trials == 0 || starts == 0 {
        let _ = writeln!(err, "error: --trials and --starts must be at least 1");
        return EXIT_INPUT;
    }
    let ((lo, hi), seed) = match parse_degree_range(degrees).and_then(|r| resolve_seed(seed).map(|s| (r, s))) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let cfg = SolverConfig {
        seed,
        num_starts: starts,
        ..Default::default()
    };
    let _ = writeln!(
        out,
        "{:>6} {:>7} {:>12} {:>13} {:>9} {:>16}",
        "degree", "trials", "median_ms", "restart_rate", "failures", "max_oracle_dist"
    );
    for n in lo..=hi {
        let mut times = Vec::with_capacity(trials);
        let mut restarts = 0usize;
        let mut failures = 0usize;
        let mut oracle: f64 = 0.0;
        for i in 0..trials {
            let target = unit_disc_polynomial(n, &mut instance_rng(seed, n, i));
            let clock = Instant::now();
            let result = solve(&target, &cfg);
            times.push(clock.elapsed().as_secs_f64() * 1e3);
            match result {
                Ok(report) => {
                    restarts += report.restarts_used;
                    if let Ok(dk) = durand_kerner(&target, 1e-10, 10_000) {
                        let m = match_root_sets(&report.roots, &dk).expect("equal degrees");
                        oracle = oracle.max(m.max_distance);
                    }
                }
                Err(_) => failures += 1,
            }
        }
        times.sort_by(f64::total_cmp);
        let median = if trials % 2 == 1 {
            times[trials / 2]
        } else {
            0.5 * (times[trials / 2 - 1] + times[trials / 2])
        };
        let _ = writeln!(
            out,
            "{n:>6} {trials:>7} {median:>12.3} {:>13.3} {failures:>9} {oracle:>16.3e}",
            restarts as f64 / trials as f64
        );
    }
    EXIT_OK
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Solve(args) => run_solve(args, out, err),
        Command::Check { seed, instances } => run_check(seed, instances, out, err),
        Command::Bench {
            degrees,
            trials,
            seed,
            starts,
        } => run_bench(&degrees, trials, seed, starts, out, err),
    }
}

/// Runs the CLI against the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
