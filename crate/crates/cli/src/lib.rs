//! Command-line front end for `cesaro-core`.
//!
//! Exit status: 0 when every check passes, 1 on a violation, 2 on a usage
//! error.

pub mod config;
pub mod format;
pub mod grammar;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use cesaro_core::moduli::{DerivedModuli, ModulusSpec};
use cesaro_core::pisier::{self, RademacherProfile};
use cesaro_core::rates::{self, TypeConstants};
use cesaro_core::spaces::{self, sample_simplex, LpSpace, MapDescriptor};
use cesaro_core::verify::{self, Verdict};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::format::Format;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "cesaro", version, about = "Rademacher-type constants, Cesaro-mean rates and inequality checks")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// `key=value` file of defaults; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Type exponent and constant from a nonsquareness witness.
    Pisier(PisierArgs),
    /// Explicit rate of asymptotic regularity.
    Rate(RateArgs),
    /// Run an inequality check.
    Verify(VerifyArgs),
    /// Cesaro means of an orbit, as an `n,residual` CSV trace.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct PisierArgs {
    #[arg(long, conflicts_with = "delta")]
    pub modulus: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub modulus: Option<String>,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, requires = "c_q")]
    pub q: Option<f64>,
    #[arg(long = "Cq", id = "c_q", requires = "q")]
    pub c_q: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Only the inner-product rate `(diam / eps)^2`.
    #[arg(long, requires = "diam", conflicts_with_all = ["modulus", "q", "b"])]
    pub hilbert_only: bool,
    #[arg(long)]
    pub diam: Option<f64>,
    /// Add the inner-product rate for the same `eps` and `b`.
    #[arg(long)]
    pub hilbert_compare: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Rademacher,
    Kahane,
    Nonsquare,
    Modulus,
    MeanZero,
    Mu2,
    Maurey,
    Afp,
    TypeGamma,
    Nonexpansive,
    Lemmas,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub check: Check,
    #[arg(long, default_value = "l2:3")]
    pub space: String,
    /// Largest batch for the sign-pattern checks.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, requires = "c_q")]
    pub q: Option<f64>,
    #[arg(long = "Cq", id = "c_q")]
    pub c_q: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value = "hilbert")]
    pub modulus: String,
    /// Nonsquareness witness; defaults to `eta(1)` of the modulus.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "rotation:angle=1")]
    pub map: String,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.9)]
    pub eps: f64,
    /// Approximate fixed point tolerance for the `afp` check.
    #[arg(long, default_value_t = 0.01)]
    pub afp_delta: f64,
    #[arg(long, default_value_t = 100)]
    pub p_tilde: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub map: String,
    #[arg(long)]
    pub space: String,
    /// Start point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value_t = 100)]
    pub nmax: u64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Radius of the perturbation added to each orbit step.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add the column `diam / sqrt(n)` and fail when a residual exceeds it.
    #[arg(long)]
    pub envelope: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// What a command produced: the rendered text and whether it passed.
pub struct Report {
    pub body: String,
    pub passed: bool,
    /// Extra lines for standard error, such as witnesses in CSV mode.
    pub note: String,
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {x}")))
    }
}

fn modulus_profile(m: &ModulusSpec, theta: f64) -> Result<RademacherProfile, CliError> {
    let delta = pisier::delta_from_modulus(m).map_err(usage)?;
    pisier::rademacher_profile(delta, theta).map_err(usage)
}

pub fn cmd_pisier(a: &PisierArgs, format: Format) -> Result<Report, CliError> {
    let delta = match (&a.modulus, a.delta) {
        (Some(m), _) => pisier::delta_from_modulus(&grammar::parse_modulus(m).map_err(usage)?).map_err(usage)?,
        (None, Some(d)) => d,
        (None, None) => return Err(CliError::Usage("need --modulus or --delta".into())),
    };
    let p = pisier::rademacher_profile(delta, a.theta).map_err(usage)?;
    Ok(Report { body: format::profile(&p, format), passed: true, note: String::new() })
}

pub fn cmd_rate(a: &RateArgs, format: Format) -> Result<Report, CliError> {
    let eps = positive("eps", a.eps)?;
    if a.hilbert_only {
        let diam = positive("diam", a.diam.unwrap_or(0.0))?;
        let n = rates::hilbert_rate(eps, diam).map_err(usage)?;
        let body = match format {
            Format::Text => format!("{n:#}\n"),
            Format::Csv => format!("eps,diam,N\n{eps},{diam},{n:#}\n"),
        };
        return Ok(Report { body, passed: true, note: String::new() });
    }
    let m = grammar::parse_modulus(a.modulus.as_deref().ok_or_else(|| usage("need --modulus"))?).map_err(usage)?;
    let b = positive("b", a.b.ok_or_else(|| usage("need --b"))?)?;
    let t = match (a.q, a.c_q) {
        (Some(q), Some(c_q)) => TypeConstants { q, c_q },
        _ => (&modulus_profile(&m, a.theta)?).into(),
    };
    let plan = rates::rate_plan(eps, b, &m, t).map_err(usage)?;
    let hilbert = if a.hilbert_compare { Some(rates::hilbert_rate(eps, b).map_err(usage)?) } else { None };
    let body = format::plan(&plan, hilbert.as_ref(), format);
    match rates::check_plan(&plan, &m) {
        Ok(()) => Ok(Report { body, passed: true, note: String::new() }),
        Err(e) => Ok(Report { body, passed: false, note: format!("plan invariant failed: {e}\n") }),
    }
}

fn run_check(c: Check, a: &VerifyArgs, s: &LpSpace, m: &ModulusSpec) -> Result<Vec<Verdict>, CliError> {
    let profile = || -> Result<(f64, f64), CliError> {
        match (a.q, a.c_q) {
            (Some(q), Some(c)) => Ok((q, c)),
            _ => modulus_profile(m, a.theta).map(|p| (p.q, p.c_q)),
        }
    };
    let delta = || match a.delta {
        Some(d) => Ok(d),
        None => pisier::delta_from_modulus(m).map_err(usage),
    };
    let map = || -> Result<MapDescriptor, CliError> {
        MapDescriptor::new(*s, grammar::parse_map(&a.map).map_err(usage)?, positive("radius", a.radius)?).map_err(usage)
    };
    let derived = || DerivedModuli::new(m.clone(), a.b).map_err(usage);
    let (t, seed) = (a.trials, a.seed);
    let v = match c {
        Check::Rademacher => {
            let (q, c_q) = profile()?;
            verify::rademacher_suite(s, a.n, q, c_q, t, seed).map_err(usage)?
        }
        Check::Kahane => verify::kahane_suite(s, a.n, a.q.map_or_else(|| profile().map(|p| p.0), Ok)?, t, seed).map_err(usage)?,
        Check::Nonsquare => verify::nonsquare_check(s, delta()?, t, seed).map_err(usage)?,
        Check::Modulus => verify::modulus_check(s, m, t, seed).map_err(usage)?,
        Check::MeanZero => {
            let (q, c_q) = profile()?;
            verify::mean_zero_suite(s, q, c_q, t, seed).map_err(usage)?
        }
        Check::Mu2 => verify::mu2_estimate_check(s, 1.0 - delta()?, t, seed).map_err(usage)?,
        Check::Maurey => {
            let (q, c_q) = profile()?;
            let mut rng = verify::trial_rng(seed, u64::MAX);
            let points: Vec<Vec<f64>> = (0..4).map(|_| s.sample_ball(a.b / 2.0, &mut rng)).collect();
            let weights = sample_simplex(points.len(), &mut rng);
            verify::maurey_check(s, &weights, &points, a.p_tilde, q, c_q, a.b, t.max(2), seed).map_err(usage)?
        }
        Check::Afp => verify::convex_hull_afp_check(&map()?, a.afp_delta, a.eps, t, seed).map_err(usage)?,
        Check::TypeGamma => verify::type_gamma_check(&map()?, &derived()?, t, seed).map_err(usage)?,
        Check::Nonexpansive => verify::nonexpansive_check(&map()?, t, seed),
        Check::Lemmas => return Ok(verify::lemma_suite(&derived()?, t, seed).to_vec()),
        Check::All => {
            let mut out = Vec::new();
            for c in [
                Check::Rademacher,
                Check::Kahane,
                Check::Nonsquare,
                Check::Modulus,
                Check::MeanZero,
                Check::Mu2,
                Check::Maurey,
                Check::Lemmas,
            ] {
                out.extend(run_check(c, a, s, m)?);
            }
            if s.is_euclidean() && s.dim() >= 2 {
                for c in [Check::Afp, Check::TypeGamma, Check::Nonexpansive] {
                    out.extend(run_check(c, a, s, m)?);
                }
            }
            return Ok(out);
        }
    };
    Ok(vec![v])
}

pub fn cmd_verify(a: &VerifyArgs, format: Format) -> Result<Report, CliError> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.n == 0 || a.n > verify::MAX_EXHAUSTIVE {
        return Err(usage(format!("--n must lie in 1..={}, got {}", verify::MAX_EXHAUSTIVE, a.n)));
    }
    let s = grammar::parse_space(&a.space).map_err(usage)?;
    let m = grammar::parse_modulus(&a.modulus).map_err(usage)?;
    let vs = run_check(a.check, a, &s, &m)?;
    let passed = vs.iter().all(|v| v.passed);
    let note = match format {
        Format::Csv => vs.iter().filter(|v| !v.passed).map(format::witness).collect(),
        Format::Text => String::new(),
    };
    Ok(Report { body: format::verdicts(&vs, format), passed, note })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Report, CliError> {
    let s = grammar::parse_space(&a.space).map_err(usage)?;
    let kind = grammar::parse_map(&a.map).map_err(usage)?;
    let map = MapDescriptor::new(s, kind, positive("radius", a.radius)?).map_err(usage)?;
    let x = grammar::parse_vector(&a.x, ',').map_err(usage)?;
    let run = map.run(&x, a.nmax, a.noise, a.seed).map_err(usage)?;
    let env = spaces::hilbert_envelope(map.diameter());
    let mut body = String::from(format::trace_header(a.envelope));
    let mut worst: Option<(u64, f64, f64)> = None;
    for row in run {
        let row = row.map_err(usage)?;
        let e = a.envelope.then(|| env(row.n));
        if let Some(e) = e {
            if row.residual > e + 1e-9 && worst.is_none() {
                worst = Some((row.n, row.residual, e));
            }
        }
        body.push_str(&format::trace_row(row.n, row.residual, e));
    }
    let note = worst.map_or(String::new(), |(n, r, e)| format!("residual {r} exceeds envelope {e} at n={n}\n"));
    Ok(Report { body, passed: worst.is_none(), note })
}

pub fn dispatch(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Pisier(a) => cmd_pisier(a, cli.format),
        Command::Rate(a) => cmd_rate(a, cli.format),
        Command::Verify(a) => cmd_verify(a, cli.format),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Parses `args`, runs the command and writes its output; returns the exit
/// status.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    let args = match config::merge(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let report = match dispatch(&cli) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let written = match &cli.output {
        Some(p) => std::fs::write(p, &report.body),
        None => stdout.write_all(report.body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return EXIT_USAGE;
    }
    let _ = stderr.write_all(report.note.as_bytes());
    if report.passed {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}
