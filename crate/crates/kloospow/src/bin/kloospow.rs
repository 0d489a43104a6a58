//! CLI driver: evaluates single sums, runs report-producing experiment
//! grids, and replays the verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 resource or ceiling error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kloospow::averages::{
    count_roots_full, count_roots_ranged, empirical_tau, korobov_report, sum_kloosterman,
    AverageQuery, PolyCongruenceQuery, KOROBOV_DEFAULT_C,
};
use kloospow::divisor::{error_scan, error_term, DivisorQuery, SCAN_BUDGET};
use kloospow::kloosterman::{KloostermanQuery, Method};
use kloospow::modular::PrimePowerModulus;
use kloospow::padic::IntPolynomial;
use kloospow::report::{ExperimentReport, Manifest, ReportFormat, SchemaId, Value};
use kloospow::sampler::Stream;
use kloospow::verify::{Suite, SuiteReport};
use kloospow::Error;

/// Kloosterman sums, polynomial congruences, and divisor error terms
/// modulo odd prime powers.
#[derive(Parser)]
#[command(name = "kloospow", version)]
struct Cli {
    /// Worker thread cap (default: KLOOSPOW_THREADS, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the report to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report encoding
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for every sampled quantity, recorded in the manifest
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Timestamp recorded in the manifest; the empty default keeps reruns
    /// byte-identical
    #[arg(long, global = true, default_value = "")]
    timestamp: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn report(self) -> ReportFormat {
        match self {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one Kloosterman sum S(n, a; p^k)
    Eval(EvalArgs),
    /// Average S(m n, a; q) over 1 <= n <= N across a modulus grid
    Average(AverageArgs),
    /// Scan divisor error terms E(X; q, a) over unit residues
    DivisorScan(DivisorScanArgs),
    /// Count roots of a polynomial congruence modulo p^mu
    Roots(RootsArgs),
    /// Exponential-sum report for f(x)/p^mu over x <= P
    Korobov(KorobovArgs),
    /// Run the self-check suites
    Verify(VerifyArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(short, long)]
    n: u128,
    #[arg(short, long)]
    a: u128,
    #[arg(short, long)]
    p: u128,
    #[arg(short, long)]
    k: u32,
    #[arg(long, value_enum, default_value_t = EvalMethod::Auto)]
    method: EvalMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMethod {
    Auto,
    Brute,
    Formula,
}

impl EvalMethod {
    fn name(self) -> &'static str {
        match self {
            EvalMethod::Auto => "auto",
            EvalMethod::Brute => "brute",
            EvalMethod::Formula => "formula",
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("n_select").required(true).args(["n_bound", "lambda"])))]
struct AverageArgs {
    #[arg(short, long)]
    p: u128,
    /// Single modulus exponent
    #[arg(short, long, conflicts_with_all = ["k_min", "k_max"])]
    k: Option<u32>,
    #[arg(long, requires = "k_max")]
    k_min: Option<u32>,
    #[arg(long, requires = "k_min")]
    k_max: Option<u32>,
    /// Explicit summation length N
    #[arg(long)]
    n_bound: Option<u128>,
    /// Summation length as N = floor(q^lambda)
    #[arg(long)]
    lambda: Option<f64>,
    /// Twist multiplier m
    #[arg(short, long, default_value_t = 1)]
    m: u128,
    /// One explicit residue a
    #[arg(short, long, group = "a_select")]
    a: Option<u128>,
    /// Sweep every unit residue a
    #[arg(long, group = "a_select")]
    all_units: bool,
    /// Seeded sample of this many unit residues a
    #[arg(long, group = "a_select")]
    sample: Option<u32>,
    /// Recorded in the manifest only; tags a run family for cross-reference
    #[arg(short, long)]
    b: Option<f64>,
}

#[derive(Args)]
struct DivisorScanArgs {
    #[arg(short, long)]
    x: u128,
    #[arg(short, long)]
    p: u128,
    #[arg(short, long, conflicts_with_all = ["k_min", "k_max"])]
    k: Option<u32>,
    #[arg(long, requires = "k_max")]
    k_min: Option<u32>,
    #[arg(long, requires = "k_min")]
    k_max: Option<u32>,
    /// Residues per modulus before sampling kicks in
    #[arg(long, default_value_t = SCAN_BUDGET)]
    budget: u64,
    /// Scan one explicit residue instead of sweeping units
    #[arg(short, long)]
    a: Option<u128>,
}

#[derive(Args)]
struct RootsArgs {
    /// Coefficients c0,c1,...,cd in ascending degree order
    #[arg(long, value_parser = parse_coeffs, allow_hyphen_values = true)]
    coeffs: Coeffs,
    #[arg(short, long)]
    p: u128,
    #[arg(long)]
    mu: u32,
    /// Count roots in [1, Q] instead of one full period
    #[arg(short = 'Q', long)]
    bound: Option<u128>,
}

#[derive(Args)]
struct KorobovArgs {
    /// Coefficients c0,c1,...,cd in ascending degree order
    #[arg(long, value_parser = parse_coeffs, allow_hyphen_values = true)]
    coeffs: Coeffs,
    #[arg(short, long)]
    p: u128,
    #[arg(long)]
    mu: u32,
    /// Summation range P
    #[arg(short = 'P', long)]
    range: u128,
    /// Envelope constant c
    #[arg(long, default_value_t = KOROBOV_DEFAULT_C)]
    c: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Formula,
    Valuation,
    Reduction,
    Roots,
    Hyperbola,
    All,
}

#[derive(Debug, Clone)]
struct Coeffs(Vec<i64>);

impl Coeffs {
    fn canonical(&self) -> String {
        self.0
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn parse_coeffs(s: &str) -> Result<Coeffs, String> {
    let coeffs = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|e| format!("bad coefficient {t:?}: {e}"))
        })
        .collect::<Result<Vec<i64>, String>>()?;
    if coeffs.is_empty() {
        return Err("need at least one coefficient".into());
    }
    Ok(Coeffs(coeffs))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Domain(e) => match e {
                Error::TooLarge { .. }
                | Error::ModulusTooWide { .. }
                | Error::TooManyRoots { .. }
                | Error::Unfactorable(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            },
            CliError::Io(_) => ExitCode::from(3),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("KLOOSPOW_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Eval(args) => cmd_eval(cli, args),
        Command::Average(args) => cmd_average(cli, args),
        Command::DivisorScan(args) => cmd_divisor_scan(cli, args),
        Command::Roots(args) => cmd_roots(cli, args),
        Command::Korobov(args) => cmd_korobov(cli, args),
        Command::Verify(args) => cmd_verify(cli, args),
    }
}

/// Resolves --k / --k-min / --k-max into an inclusive exponent range.
fn k_range(k: Option<u32>, lo: Option<u32>, hi: Option<u32>) -> Result<(u32, u32), CliError> {
    match (k, lo, hi) {
        (Some(k), None, None) => Ok((k, k)),
        (None, Some(lo), Some(hi)) if lo <= hi => Ok((lo, hi)),
        (None, Some(lo), Some(hi)) => Err(CliError::Usage(format!(
            "empty exponent range: --k-min {lo} > --k-max {hi}"
        ))),
        _ => Err(CliError::Usage(
            "pass --k, or both --k-min and --k-max".into(),
        )),
    }
}

fn manifest(cli: &Cli, command: String) -> Manifest {
    Manifest::new(command, cli.seed).with_timestamp(cli.timestamp.clone())
}

/// Command fragment that reproduces the manifest-relevant global flags.
fn global_suffix(cli: &Cli) -> String {
    let mut s = format!(" --seed {}", cli.seed);
    if !cli.timestamp.is_empty() {
        s.push_str(&format!(" --timestamp {}", cli.timestamp));
    }
    s
}

fn emit(report: &ExperimentReport, cli: &Cli) -> Result<(), CliError> {
    let mut text = report.render(cli.format.report());
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<ExitCode, CliError> {
    let modulus = PrimePowerModulus::new(args.p, args.k)?;
    let query = KloostermanQuery::new(args.n, args.a, modulus)?;
    let value = match args.method {
        EvalMethod::Auto => query.evaluate()?,
        EvalMethod::Brute => query.brute_force()?,
        EvalMethod::Formula => query.explicit_formula()?,
    };
    println!("{} ({})", value.value, value.method);
    let mut cross = f64::NAN;
    if args.method == EvalMethod::Auto
        && value.method != Method::BruteForce
        && modulus.q() <= 100_000
    {
        let brute = query.brute_force()?;
        cross = (brute.value - value.value).abs();
        println!("cross-check: brute force {} (|diff| {cross:.3e})", brute.value);
    }
    if cli.out.is_some() {
        let command = format!(
            "eval -n {} -a {} -p {} -k {} --method {}{}",
            args.n,
            args.a,
            args.p,
            args.k,
            args.method.name(),
            global_suffix(cli)
        );
        let mut report = ExperimentReport::new(SchemaId::KloostOracle, manifest(cli, command));
        report.push_row(vec![
            Value::from_u128(args.n),
            Value::from_u128(args.a),
            Value::from_u128(args.p),
            Value::from(args.k),
            Value::from_u128(modulus.q()),
            Value::Float(value.value),
            Value::text(value.method.to_string()),
            Value::Float(cross),
        ]);
        emit(&report, cli)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_average(cli: &Cli, args: &AverageArgs) -> Result<ExitCode, CliError> {
    let (k_lo, k_hi) = k_range(args.k, args.k_min, args.k_max)?;
    let n_spec = match (args.n_bound, args.lambda) {
        (Some(n), None) => format!("--n-bound {n}"),
        (None, Some(l)) => format!("--lambda {l}"),
        _ => unreachable!("clap group picks exactly one"),
    };
    let a_spec = if args.all_units {
        "--all-units".to_string()
    } else if let Some(c) = args.sample {
        format!("--sample {c}")
    } else {
        format!("--a {}", args.a.unwrap_or(1))
    };
    let b_spec = args
        .b
        .map(|b| format!(" -b {b}"))
        .unwrap_or_default();
    let command = format!(
        "average --p {} --k-min {k_lo} --k-max {k_hi} {n_spec} --m {} {a_spec}{b_spec}{}",
        args.p,
        args.m,
        global_suffix(cli)
    );
    let mut meta = manifest(cli, command)
        .param("p", args.p)
        .param("m", args.m);
    if let Some(l) = args.lambda {
        meta = meta.param("lambda", l);
    }
    if let Some(b) = args.b {
        meta = meta.param("B", b);
    }
    let mut report = ExperimentReport::new(SchemaId::KloostAverage, meta);
    for k in k_lo..=k_hi {
        let modulus = PrimePowerModulus::new(args.p, k)?;
        let q = modulus.q();
        let residues: Vec<u128> = if args.all_units {
            (1..q).filter(|&a| modulus.is_unit(a)).collect()
        } else if let Some(count) = args.sample {
            let mut rng = Stream::new(cli.seed, k as u64);
            let mut draws: Vec<u128> = (0..count).map(|_| rng.unit(&modulus)).collect();
            draws.sort_unstable();
            draws.dedup();
            draws
        } else {
            vec![args.a.unwrap_or(1)]
        };
        for a in residues {
            let query = match (args.n_bound, args.lambda) {
                (Some(n), None) => {
                    let lambda = (n as f64).ln() / (q as f64).ln();
                    AverageQuery::new(n, args.m, a, modulus, lambda)?
                }
                (None, Some(lambda)) => AverageQuery::from_lambda(args.m, a, modulus, lambda)?,
                _ => unreachable!("clap group picks exactly one"),
            };
            let n = query.n_bound();
            let (sum, _terms) = sum_kloosterman(&query)?;
            let normalized = sum / (n as f64 * (q as f64).sqrt());
            report.push_row(vec![
                Value::from_u128(args.p),
                Value::from(k),
                Value::from_u128(q),
                Value::from_u128(n),
                Value::Float((n as f64).ln() / (q as f64).ln()),
                Value::from_u128(args.m),
                Value::from_u128(a),
                Value::Float(sum),
                Value::Float(normalized),
                Value::Float(empirical_tau(&query, sum)),
            ]);
        }
    }
    emit(&report, cli)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_divisor_scan(cli: &Cli, args: &DivisorScanArgs) -> Result<ExitCode, CliError> {
    let (k_lo, k_hi) = k_range(args.k, args.k_min, args.k_max)?;
    let a_spec = match args.a {
        Some(a) => format!(" --a {a}"),
        None => format!(" --budget {}", args.budget),
    };
    let command = format!(
        "divisor-scan --x {} --p {} --k-min {k_lo} --k-max {k_hi}{a_spec}{}",
        args.x,
        args.p,
        global_suffix(cli)
    );
    let meta = manifest(cli, command).param("p", args.p).param("X", args.x);
    let mut report = ExperimentReport::new(SchemaId::DivisorScan, meta);
    for k in k_lo..=k_hi {
        let modulus = PrimePowerModulus::new(args.p, k)?;
        let q = modulus.q();
        let (a_mode, max_abs_e, max_normalized, delta_hat) = match args.a {
            Some(a) => {
                let result = error_term(&DivisorQuery::new(args.x, a, modulus)?);
                let norm = result.normalized.abs();
                (
                    format!("explicit({a})"),
                    result.e.abs(),
                    norm,
                    decay_exponent(norm, args.x),
                )
            }
            None => {
                let scan = error_scan(args.x, &modulus, args.budget, cli.seed)?;
                let mode = if scan.sampled {
                    format!("sample({})", scan.scanned)
                } else {
                    format!("all-units({})", scan.scanned)
                };
                (mode, scan.max_abs_e, scan.max_normalized, scan.delta_hat)
            }
        };
        report.push_row(vec![
            Value::from_u128(args.x),
            Value::from_u128(args.p),
            Value::from(k),
            Value::from_u128(q),
            Value::Float(q as f64 / (args.x as f64).powf(2.0 / 3.0)),
            Value::text(a_mode),
            Value::Float(max_abs_e),
            Value::Float(max_normalized),
            Value::Float(delta_hat),
        ]);
    }
    emit(&report, cli)?;
    Ok(ExitCode::SUCCESS)
}

fn decay_exponent(normalized: f64, x: u128) -> f64 {
    if normalized == 0.0 {
        f64::INFINITY
    } else {
        -normalized.ln() / (x as f64).ln()
    }
}

fn checked_prime_power(p: u128, mu: u32) -> Result<u128, CliError> {
    let mut q: u128 = 1;
    for _ in 0..mu {
        q = q
            .checked_mul(p)
            .ok_or(Error::ModulusTooWide { p, k: mu })?;
    }
    Ok(q)
}

fn cmd_roots(cli: &Cli, args: &RootsArgs) -> Result<ExitCode, CliError> {
    let f = IntPolynomial::from_i64(&args.coeffs.0);
    let q = checked_prime_power(args.p, args.mu)?;
    let full = count_roots_full(&f, q)?;
    let bound = args.bound.unwrap_or(q);
    let count = if bound == q {
        full
    } else {
        count_roots_ranged(&PolyCongruenceQuery::new(f.clone(), args.p, args.mu, bound)?)?
    };
    let d = f.degree();
    let rigid = if d == 0 {
        0.0
    } else {
        d as f64 * (q as f64).powf(1.0 - 1.0 / d as f64)
    };
    let command = format!(
        "roots --coeffs {} --p {} --mu {} --bound {bound}{}",
        args.coeffs.canonical(),
        args.p,
        args.mu,
        global_suffix(cli)
    );
    let meta = manifest(cli, command).param("coeffs", args.coeffs.canonical());
    let mut report = ExperimentReport::new(SchemaId::RootCount, meta);
    report.push_row(vec![
        Value::from_u128(args.p),
        Value::from(args.mu),
        Value::from_u128(q),
        Value::from(d),
        Value::from_u128(bound),
        Value::from_u128(count),
        Value::Float(rigid),
    ]);
    emit(&report, cli)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_korobov(cli: &Cli, args: &KorobovArgs) -> Result<ExitCode, CliError> {
    let f = IntPolynomial::from_i64(&args.coeffs.0);
    let q = checked_prime_power(args.p, args.mu)?;
    let row = korobov_report(&f, args.p, args.mu, args.range, args.c)?;
    let command = format!(
        "korobov --coeffs {} --p {} --mu {} --range {} --c {}{}",
        args.coeffs.canonical(),
        args.p,
        args.mu,
        args.range,
        args.c,
        global_suffix(cli)
    );
    let meta = manifest(cli, command).param("coeffs", args.coeffs.canonical());
    let mut report = ExperimentReport::new(SchemaId::Korobov, meta);
    report.push_row(vec![
        Value::from(row.degree),
        Value::from_u128(row.p),
        Value::from(row.mu),
        Value::from_u128(q),
        Value::from_u128(row.range),
        Value::Float(row.r),
        Value::from(row.beta),
        Value::Float(row.c),
        Value::Float(row.lhs),
        Value::Float(row.trivial_bound),
        Value::from_u128(row.big_r),
        Value::from(row.n_used),
        Value::Float(row.rhs),
        Value::flag(row.bound_holds),
        Value::flag(row.hypotheses_ok),
    ]);
    emit(&report, cli)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<ExitCode, CliError> {
    let suites: Vec<Suite> = match args.suite {
        SuiteArg::Formula => vec![Suite::Formula],
        SuiteArg::Valuation => vec![Suite::Valuation],
        SuiteArg::Reduction => vec![Suite::Reduction],
        SuiteArg::Roots => vec![Suite::Roots],
        SuiteArg::Hyperbola => vec![Suite::Hyperbola],
        SuiteArg::All => Suite::all().to_vec(),
    };
    let reports: Vec<SuiteReport> = suites.iter().map(|s| s.run()).collect();
    if cli.format == Format::Json {
        let mut text =
            serde_json::to_string_pretty(&reports).expect("suite reports serialize");
        text.push('\n');
        match &cli.out {
            Some(path) => fs::write(path, text)?,
            None => print!("{text}"),
        }
    } else {
        for r in &reports {
            match &r.first_witness {
                None => println!("{}: {} checks, 0 failures", r.name, r.checks),
                Some(w) => println!(
                    "{}: {} checks, {} failures; first witness: {w}",
                    r.name, r.checks, r.failures
                ),
            }
        }
    }
    let failed = reports.iter().any(|r| !r.passed());
    Ok(if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}
