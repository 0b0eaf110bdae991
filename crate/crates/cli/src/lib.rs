//! Command-line front end: factor, complete, verify, random and info.
//!
//! Exit codes: 0 when every verdict passes, 1 when a verification check
//! fails, 2 for invalid input or arguments, 3 for numerical failures.

pub mod format;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use polyfact::instances::{gen_lossless, gen_spectrum, SpectrumOptions};
use polyfact::paraunitary::{check_unit_norm_row, complete_to_paraunitary, verify_paraunitary, LosslessRow, ParaunitaryReport};
use polyfact::rankdef::{estimate_rank, spectral_factor, verify_factorization, RankDefOptions, Verdict};
use polyfact::{AnalyticPolyMatrix, LaurentMatrix};
use serde_json::{json, Value};

use format::{read_matrix, Metadata, MatrixFile, ReportFile, VerdictEntry};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INVALID_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<polyfact::Error> for CliError {
    fn from(e: polyfact::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Rank selection for `factor`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankArg {
    Auto,
    Fixed(usize),
}

impl FromStr for RankArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(RankArg::Auto);
        }
        s.parse()
            .map(RankArg::Fixed)
            .map_err(|_| format!("expected `auto` or a positive integer, got `{s}`"))
    }
}

impl RankArg {
    fn to_value(self) -> Value {
        match self {
            RankArg::Auto => json!("auto"),
            RankArg::Fixed(k) => json!(k),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "polyfact", version, about = "Spectral factorization and paraunitary completion of matrix polynomials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral factor S+ of a nonnegative para-Hermitian matrix S = S+ (S+)*.
    Factor {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// `auto` or the rank of S.
        #[arg(long, default_value = "auto")]
        rank: RankArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file for S+; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Completes a unit-norm row to a paraunitary matrix.
    Complete {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Checks a factorization `S = S+ (S+)*` or the paraunitarity of a matrix.
    Verify {
        #[arg(long, num_args = 2, value_names = ["S", "SPLUS"], required_unless_present = "paraunitary", conflicts_with = "paraunitary")]
        factor: Option<Vec<PathBuf>>,
        #[arg(long, value_name = "U")]
        paraunitary: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Writes a random spectrum with a known factor, or a lossless row with
    /// a known completion.
    Random {
        #[arg(long)]
        m: usize,
        /// Rank of the spectrum; defaults to `m`.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the secret factor (or the secret completion).
        #[arg(long)]
        factor_out: Option<PathBuf>,
        #[arg(long)]
        lossless: bool,
        /// Make the secret factor outer.
        #[arg(long)]
        interior_zero_free: bool,
    },
    /// Prints dimensions, power range, para-Hermitian flag and rank.
    Info { path: PathBuf },
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_PASS };
        }
    };
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match cli.command {
        Command::Info { path } => match info(&path) {
            Ok(line) => {
                println!("{line}");
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Random {
            m,
            k,
            order,
            seed,
            out,
            factor_out,
            lossless,
            interior_zero_free,
        } => match random(m, k, order, seed, out.as_deref(), factor_out.as_deref(), lossless, interior_zero_free) {
            Ok(()) => EXIT_PASS,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        command => run_checked(command, echo),
    }
}

/// Commands that produce a report.
fn run_checked(command: Command, arguments: Vec<String>) -> i32 {
    let (name, report_path, options, outcome) = match command {
        Command::Factor {
            input,
            tol,
            rank,
            seed,
            out,
            report,
        } => {
            let options = options_map([
                ("input", json!(input)),
                ("tol", json!(tol)),
                ("rank", rank.to_value()),
                ("seed", json!(seed)),
                ("out", json!(out)),
            ]);
            ("factor", report, options, factor(&input, tol, rank, seed, out.as_deref()))
        }
        Command::Complete {
            input,
            tol,
            seed,
            out,
            report,
        } => {
            let options = options_map([
                ("input", json!(input)),
                ("tol", json!(tol)),
                ("seed", json!(seed)),
                ("out", json!(out)),
            ]);
            ("complete", report, options, complete(&input, tol, seed, out.as_deref()))
        }
        Command::Verify {
            factor,
            paraunitary,
            tol,
            seed,
            report,
        } => {
            let options = options_map([
                ("factor", json!(factor)),
                ("paraunitary", json!(paraunitary)),
                ("tol", json!(tol)),
                ("seed", json!(seed)),
            ]);
            let outcome = match (factor, paraunitary) {
                (Some(paths), _) => verify_factor(&paths[0], &paths[1], tol, seed),
                (None, Some(path)) => verify_unitary(&path, tol),
                (None, None) => Err(CliError::Input("one of --factor or --paraunitary is required".into())),
            };
            ("verify", report, options, outcome)
        }
        Command::Info { .. } | Command::Random { .. } => unreachable!("handled without a report"),
    };

    let mut report = ReportFile {
        command: name.into(),
        arguments,
        options,
        verdicts: BTreeMap::new(),
        details: BTreeMap::new(),
        error: None,
        exit_code: EXIT_PASS,
    };
    match outcome {
        Ok(checked) => {
            report.verdicts = checked.verdicts.iter().map(|(k, v)| (k.clone(), VerdictEntry::from(v))).collect();
            report.details = checked.details;
            report.exit_code = if report.all_pass() { EXIT_PASS } else { EXIT_VERIFY_FAILED };
            for (k, v) in &report.verdicts {
                eprintln!(
                    "{name}: {k:<22} {} (measured {:.3e}, threshold {:.3e})",
                    if v.pass { "pass" } else { "FAIL" },
                    v.measured,
                    v.threshold
                );
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            report.verdicts.insert("completed".into(), VerdictEntry::from(&Verdict::flag(false)));
            report.error = Some(e.to_string());
            report.exit_code = e.exit_code();
        }
    }
    if let Some(path) = report_path {
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_INVALID_INPUT;
        }
    }
    report.exit_code
}

fn options_map<const N: usize>(entries: [(&str, Value); N]) -> BTreeMap<String, Value> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Verdicts and extra facts of a successful run.
struct Checked {
    verdicts: BTreeMap<String, Verdict>,
    details: BTreeMap<String, Value>,
}

fn write_matrix(m: &LaurentMatrix, metadata: Metadata, out: Option<&Path>) -> Result<(), CliError> {
    let text = MatrixFile::from_matrix(m, Some(metadata)).to_json();
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn order_of(m: &LaurentMatrix) -> usize {
    m.hi().unwrap_or(0).max(0) as usize
}

fn rank_options(m: usize, order: usize, tol: f64, seed: u64) -> Result<RankDefOptions, CliError> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::Input(format!("tolerance {tol} outside (0, 1)")));
    }
    Ok(RankDefOptions {
        tol,
        rng_seed: seed,
        ..RankDefOptions::for_problem(m, order)
    })
}

fn factor(input: &Path, tol: f64, rank: RankArg, seed: u64, out: Option<&Path>) -> Result<Checked, CliError> {
    let s = read_matrix(input)?;
    if !s.is_square() {
        return Err(CliError::Input(format!("{}x{} is not square", s.rows(), s.cols())));
    }
    let mut opts = rank_options(s.rows(), order_of(&s), tol, seed)?;
    if let RankArg::Fixed(k) = rank {
        if k == 0 || k > s.rows() {
            return Err(CliError::Input(format!("rank {k} outside 1..={}", s.rows())));
        }
        opts.forced_rank = Some(k);
    }
    let (f, report) = spectral_factor(&s, &opts)?;
    let metadata = Metadata {
        name: Some("spectral factor".into()),
        seed: Some(seed),
        generator: Some("polyfact factor".into()),
    };
    write_matrix(&f, metadata, out)?;
    let details = BTreeMap::from([
        ("detected_rank".to_string(), json!(report.detected_rank)),
        ("pivot".to_string(), json!(report.pivot)),
        ("pole_removals".to_string(), json!(report.pole_ops.len())),
        ("zero_removals".to_string(), json!(report.zero_ops.len())),
        ("order".to_string(), json!(report.order)),
    ]);
    Ok(Checked {
        verdicts: report.verdicts,
        details,
    })
}

fn paraunitary_verdicts(report: &ParaunitaryReport, tol: f64) -> BTreeMap<String, Verdict> {
    BTreeMap::from([
        ("coefficient_unitarity".to_string(), Verdict::at_most(report.deviation, tol)),
        ("sample_unitarity".to_string(), Verdict::at_most(report.sample_deviation, tol)),
        ("det_monomial".to_string(), Verdict::at_most(report.det_off_monomial, tol)),
        ("degree_at_least_length".to_string(), Verdict::flag(report.degree >= report.length)),
    ])
}

fn paraunitary_details(report: &ParaunitaryReport) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("degree".to_string(), json!(report.degree)),
        ("length".to_string(), json!(report.length)),
        ("det_phase".to_string(), json!([report.det_phase.re, report.det_phase.im])),
    ])
}

fn complete(input: &Path, tol: f64, seed: u64, out: Option<&Path>) -> Result<Checked, CliError> {
    let m = read_matrix(input)?;
    if m.rows() != 1 {
        return Err(CliError::Input(format!("a row file has one row, got {}", m.rows())));
    }
    let row = LosslessRow::from_matrix(&m)?;
    if !check_unit_norm_row(&row, tol) {
        return Err(CliError::Input("row does not have unit norm on the unit circle".into()));
    }
    let opts = rank_options(row.len(), row.order(), tol, seed)?;
    let (u, report) = complete_to_paraunitary(&row, &opts)?;
    let metadata = Metadata {
        name: Some("paraunitary completion".into()),
        seed: Some(seed),
        generator: Some("polyfact complete".into()),
    };
    write_matrix(&u, metadata, out)?;
    let cols: Vec<usize> = (0..row.len()).collect();
    let first_row_kept = u.select(&[0], &cols) == *row.to_matrix();
    let mut verdicts = paraunitary_verdicts(&report, tol);
    verdicts.insert("first_row_unchanged".into(), Verdict::flag(first_row_kept));
    verdicts.insert("degree_equals_order".into(), Verdict::flag(report.degree == row.order()));
    Ok(Checked {
        verdicts,
        details: paraunitary_details(&report),
    })
}

fn verify_factor(s_path: &Path, f_path: &Path, tol: f64, seed: u64) -> Result<Checked, CliError> {
    let s = read_matrix(s_path)?;
    let f = AnalyticPolyMatrix::new(read_matrix(f_path)?)?;
    if !s.is_square() || s.rows() != f.rows() {
        return Err(CliError::Input(format!(
            "S is {}x{} but the factor is {}x{}",
            s.rows(),
            s.cols(),
            f.rows(),
            f.cols()
        )));
    }
    let opts = rank_options(s.rows(), order_of(&s), tol, seed)?;
    let report = verify_factorization(&s, &f, &opts);
    Ok(Checked {
        verdicts: report.verdicts,
        details: BTreeMap::from([("residual".to_string(), json!(report.residual))]),
    })
}

fn verify_unitary(path: &Path, tol: f64) -> Result<Checked, CliError> {
    let u = read_matrix(path)?;
    let report = verify_paraunitary(&u, tol)?;
    Ok(Checked {
        verdicts: paraunitary_verdicts(&report, tol),
        details: paraunitary_details(&report),
    })
}

#[allow(clippy::too_many_arguments)]
fn random(
    m: usize,
    k: Option<usize>,
    order: usize,
    seed: u64,
    out: Option<&Path>,
    factor_out: Option<&Path>,
    lossless: bool,
    interior_zero_free: bool,
) -> Result<(), CliError> {
    if m == 0 {
        return Err(CliError::Input("m must be positive".into()));
    }
    if lossless {
        let inst = gen_lossless(m, order, seed);
        let meta = |name: &str| Metadata {
            name: Some(name.into()),
            seed: Some(seed),
            generator: Some(format!("gen_lossless m={m} order={order}")),
        };
        write_matrix(&inst.row.to_matrix(), meta("lossless row"), out)?;
        if let Some(path) = factor_out {
            write_matrix(&inst.secret_paraunitary, meta("secret completion"), Some(path))?;
        }
        return Ok(());
    }
    let k = k.unwrap_or(m);
    if k == 0 || k > m {
        return Err(CliError::Input(format!("rank {k} outside 1..={m}")));
    }
    let inst = gen_spectrum(m, k, order, seed, SpectrumOptions { interior_zero_free });
    let meta = |name: &str| Metadata {
        name: Some(name.into()),
        seed: Some(seed),
        generator: Some(format!(
            "gen_spectrum m={m} k={k} order={order}{}",
            if interior_zero_free { " interior_zero_free" } else { "" }
        )),
    };
    write_matrix(&inst.spectrum, meta("spectrum"), out)?;
    if let Some(path) = factor_out {
        write_matrix(&inst.secret_factor, meta("secret factor"), Some(path))?;
    }
    Ok(())
}

/// One-line summary such as `2×2, powers [0,0], para-Hermitian, rank 2`.
pub fn info(path: &Path) -> Result<String, CliError> {
    let m = read_matrix(path)?;
    let (lo, hi) = (m.lo().unwrap_or(0), m.hi().unwrap_or(0));
    let mut line = format!("{}×{}, powers [{lo},{hi}]", m.rows(), m.cols());
    if m.is_square() {
        let tol = 1e-9;
        if m.is_parahermitian(tol)? {
            line.push_str(", para-Hermitian");
            if !m.is_zero() {
                let opts = RankDefOptions::for_problem(m.rows(), order_of(&m));
                line.push_str(&format!(", rank {}", estimate_rank(&m, &opts)?));
            } else {
                line.push_str(", rank 0");
            }
        } else {
            line.push_str(", not para-Hermitian");
        }
    }
    Ok(line)
}
