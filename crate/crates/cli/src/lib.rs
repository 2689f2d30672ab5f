//! Command-line front end: configuration, the `verify`, `flow`, `volume`
//! and `obstruct` workflows, and their CSV/JSON reports.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 positivity lost, 3 configuration
//! or argument error, 4 invariant, tolerance or step-size violation.

pub mod config;
pub mod suites;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use plurisym::flow::{
    make_initial_hs, make_initial_kahler, run_flow_with, DiagnosticsRecord, FlowState, Observable, Trajectory,
};
use plurisym::volume::{
    check_beta_pluriclosed, check_derivative_identities, coefficient_a, fit_polynomial, ruled_surface_a2,
    surface_obstruction, ObstructionVerdict, Probe, VolumePolynomial,
};
use serde::Serialize;

pub use config::{Format, InitialKind, RunConfig};
use suites::{Fault, SuiteResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_POSITIVITY: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plurisym", version, about = "Hermitian-symplectic flow and volume analysis on flat complex tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Overrides `initial.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pointwise and spectral invariant suites.
    Verify {
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
    /// Integrate the flow and write one diagnostics row per sample.
    Flow,
    /// Run the flow, fit the sampled volume and check the volume identities.
    Volume,
    /// Decide whether a quadratic volume polynomial vanishes at positive time.
    Obstruct(ObstructArgs),
}

#[derive(Debug, Args)]
pub struct ObstructArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a2: Option<f64>,
    /// `ruled:f=<genus>`, which sets `a2 = 4(1 − f)`.
    #[arg(long)]
    pub preset: Option<String>,
}

/// What a command produced: the report text and the exit code.
#[derive(Debug)]
pub struct Finished {
    pub report: String,
    pub code: i32,
    /// One line for standard error, if anything went wrong.
    pub message: Option<String>,
}

impl Finished {
    fn ok(report: String) -> Self {
        Finished { report, code: EXIT_OK, message: None }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.initial.seed = seed;
    }
    if cli.output.is_some() {
        cfg.output = cli.output.clone();
    }
    if cli.format.is_some() {
        cfg.format = cli.format;
    }
    Ok(cfg)
}

/// Caps the worker pool from `PLURISYM_THREADS`, when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("PLURISYM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("PLURISYM_THREADS: expected a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments already split by clap and runs the command.
pub fn execute(cli: &Cli) -> Result<Finished, CliError> {
    let cfg = load_config(cli)?;
    let format = cfg.format.unwrap_or(Format::Csv);
    let done = match &cli.command {
        Command::Verify { inject_fault } => cmd_verify(&cfg, format, *inject_fault),
        Command::Flow => cmd_flow(&cfg, format)?,
        Command::Volume => cmd_volume(&cfg, format)?,
        Command::Obstruct(args) => cmd_obstruct(args, format)?,
    };
    write_report(cfg.output.as_deref(), &done.report)?;
    Ok(done)
}

fn write_report(path: Option<&Path>, report: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, report).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(report.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn cmd_verify(cfg: &RunConfig, format: Format, fault: Option<Fault>) -> Finished {
    #[derive(Serialize)]
    struct Report<'a> {
        suites: &'a [SuiteResult],
        pass: bool,
    }
    let results = suites::run_all(cfg.initial.seed, fault);
    let pass = results.iter().all(|r| r.pass);
    let report = match format {
        Format::Json => json(&Report { suites: &results, pass }),
        Format::Csv => {
            let mut s = String::from("suite,worst_error,tolerance,pass\n");
            for r in &results {
                let _ = writeln!(s, "{},{},{},{}", r.suite, float(r.worst_error), float(r.tolerance), r.pass);
            }
            s
        }
    };
    let failed: Vec<_> = results.iter().filter(|r| !r.pass).map(|r| r.suite.as_str()).collect();
    Finished {
        report,
        code: if pass { EXIT_OK } else { EXIT_VIOLATION },
        message: (!pass).then(|| format!("invariant suites failed: {}", failed.join(", "))),
    }
}

fn initial_state(cfg: &RunConfig) -> Result<FlowState, plurisym::Error> {
    let grid = cfg.torus().expect("validated");
    let i = &cfg.initial;
    match i.kind {
        InitialKind::FlatKahler => Ok(FlowState::flat_kahler(grid)),
        InitialKind::PerturbedFlat => make_initial_hs(grid, i.seed, i.epsilon, i.mode_cutoff),
        InitialKind::PerturbedKahler => make_initial_kahler(grid, i.seed, i.epsilon, i.mode_cutoff),
    }
}

fn failure_code(e: &plurisym::Error) -> i32 {
    match e {
        plurisym::Error::PositivityLost { .. } => EXIT_POSITIVITY,
        _ => EXIT_VIOLATION,
    }
}

fn status(e: Option<&plurisym::Error>) -> &'static str {
    match e {
        None => "completed",
        Some(plurisym::Error::PositivityLost { .. }) => "positivity_lost",
        Some(plurisym::Error::StepTooLarge { .. }) => "step_too_large",
        Some(plurisym::Error::ConstraintViolation { .. }) => "constraint_violation",
        Some(_) => "numerical_failure",
    }
}

/// Header row of the flow time series.
pub fn csv_header() -> String {
    DiagnosticsRecord::COLUMNS.join(",")
}

fn flow_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = csv_header();
    s.push('\n');
    for r in records {
        let row: Vec<String> = r.values().iter().map(|v| float(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// A run that could not start or did not finish, reported with its exit code.
fn aborted(report: String, e: &plurisym::Error) -> Finished {
    Finished { report, code: failure_code(e), message: Some(format!("flow aborted: {e}")) }
}

fn run(
    cfg: &RunConfig,
    probes: &[&dyn Observable],
    observer: &mut dyn FnMut(&FlowState) -> plurisym::Result<()>,
) -> Result<Result<(FlowState, Trajectory), plurisym::Error>, CliError> {
    let initial = match initial_state(cfg) {
        Ok(s) => s,
        Err(e) => return Ok(Err(e)),
    };
    let traj = run_flow_with(&cfg.flow_config(), &initial, probes, observer)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Ok((initial, traj)))
}

pub fn cmd_flow(cfg: &RunConfig, format: Format) -> Result<Finished, CliError> {
    #[derive(Serialize)]
    struct Report<'a> {
        columns: &'a [&'a str],
        records: &'a [DiagnosticsRecord],
        status: &'a str,
        error: Option<String>,
    }
    let render = |records: &[DiagnosticsRecord], err: Option<&plurisym::Error>| match format {
        Format::Csv => flow_csv(records),
        Format::Json => json(&Report {
            columns: &DiagnosticsRecord::COLUMNS,
            records,
            status: status(err),
            error: err.map(|e| e.to_string()),
        }),
    };
    let (_, traj) = match run(cfg, &[], &mut |_| Ok(()))? {
        Ok(r) => r,
        Err(e) => return Ok(aborted(render(&[], Some(&e)), &e)),
    };
    let report = render(&traj.records, traj.failure.as_ref());
    Ok(match &traj.failure {
        None => Finished::ok(report),
        Some(e) => aborted(report, e),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), value, tolerance, pass: value <= tolerance }
}

#[derive(Debug, Serialize)]
pub struct VolumeReport {
    pub status: String,
    pub error: Option<String>,
    pub samples: usize,
    pub fitted: Option<VolumePolynomial>,
    pub formula: Option<VolumePolynomial>,
    /// `∫|integrand|` for each formula coefficient.
    pub formula_scale: Vec<f64>,
    pub checks: Vec<Check>,
}

impl VolumeReport {
    fn csv(&self) -> String {
        let mut s = String::from("item,provenance,value,tolerance,pass\n");
        for p in [&self.fitted, &self.formula].into_iter().flatten() {
            for (i, (c, prov)) in p.coeffs.iter().zip(&p.provenance).enumerate() {
                let prov = serde_json::to_value(prov).expect("serializes");
                let _ = writeln!(s, "a{i},{},{},,", prov.as_str().unwrap_or_default(), float(*c));
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "{},,{},{},{}", c.name, float(c.value), float(c.tolerance), c.pass);
        }
        s
    }
}

pub fn cmd_volume(cfg: &RunConfig, format: Format) -> Result<Finished, CliError> {
    let n = cfg.dimension;
    let f = &cfg.flow;
    if f.steps < f.sample_every + 2 {
        return Err(CliError::Config(
            "flow.steps: the volume checks need steps ≥ sample_every + 2 for a difference window".into(),
        ));
    }
    if f.steps / f.sample_every < n {
        return Err(CliError::Config(format!("flow.steps: a degree {n} fit needs at least {} samples", n + 1)));
    }
    let tol = &cfg.tolerances;
    let probes = if n == 2 { vec![Probe::Volume, Probe::PhiNorm] } else { vec![Probe::Volume] };
    let probes: Vec<&dyn Observable> = probes.iter().map(|p| p as &dyn Observable).collect();
    let mut beta_worst = 0.0f64;
    let mut observer = |s: &FlowState| {
        for k in 0..n {
            beta_worst = beta_worst.max(check_beta_pluriclosed(s, k)?);
        }
        Ok(())
    };
    let outcome = run(cfg, &probes, &mut observer)?;
    let mut report = VolumeReport {
        status: String::new(),
        error: None,
        samples: 0,
        fitted: None,
        formula: None,
        formula_scale: Vec::new(),
        checks: Vec::new(),
    };
    let render = |r: &VolumeReport| match format {
        Format::Csv => r.csv(),
        Format::Json => json(r),
    };
    let (initial, traj) = match outcome {
        Ok(v) => v,
        Err(e) => {
            report.status = status(Some(&e)).into();
            report.error = Some(e.to_string());
            return Ok(aborted(render(&report), &e));
        }
    };
    report.status = status(traj.failure.as_ref()).into();
    report.error = traj.failure.as_ref().map(|e| e.to_string());
    report.samples = traj.records.len();
    if let Some(e) = &traj.failure {
        return Ok(aborted(render(&report), e));
    }

    let coeff = |i| coefficient_a(&initial, i).map_err(|e| CliError::Config(e.to_string()));
    let estimates = (0..=n).map(coeff).collect::<Result<Vec<_>, _>>()?;
    let formula = VolumePolynomial {
        coeffs: estimates.iter().map(|c| c.value).collect(),
        provenance: vec![plurisym::volume::Provenance::IntegralFormula; n + 1],
        residual: None,
    };
    report.formula_scale = estimates.iter().map(|c| c.scale).collect();
    let ts: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
    let vs: Vec<f64> = traj.records.iter().map(|r| r.volume).collect();
    match fit_polynomial(&ts, &vs, n) {
        Ok(fit) => {
            let a0 = formula.coeffs[0];
            report.checks.push(check("fit_residual", fit.residual.unwrap_or(0.0), tol.fit_residual));
            report.checks.push(check("constant_term", (fit.coeffs[0] - a0).abs() / a0.abs(), tol.constant_term));
            for i in 1..n {
                // aᵢ vanishes on a torus, so compare against the integrand's scale
                let reference = formula.coeffs[i].abs().max(estimates[i].scale);
                let reference = if reference > 0.0 { reference } else { a0.abs() };
                let err = (fit.coeffs[i] - formula.coeffs[i]).abs() / reference;
                report.checks.push(check(format!("coefficient_a{i}"), err, tol.coefficient_match));
            }
            report.checks.push(check("leading_coefficient", fit.coeffs[n].abs() / a0.abs(), tol.leading_coefficient));
            report.fitted = Some(fit);
        }
        Err(e) => report.checks.push(Check { name: format!("fit: {e}"), value: f64::NAN, tolerance: 0.0, pass: false }),
    }
    report.formula = Some(formula);
    report.checks.push(check("beta_pluriclosed", beta_worst, tol.beta_pluriclosed));
    match check_derivative_identities(&traj.probes, traj.dt) {
        Ok(ids) => {
            for c in ids {
                report.checks.push(check(format!("derivative_{}", c.name), c.max_rel_error, tol.derivative_identity));
            }
        }
        Err(e) => {
            report.checks.push(Check { name: format!("derivative: {e}"), value: f64::NAN, tolerance: 0.0, pass: false })
        }
    }
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let text = render(&report);
    Ok(if failed.is_empty() {
        Finished::ok(text)
    } else {
        Finished { report: text, code: EXIT_VIOLATION, message: Some(format!("volume checks failed: {}", failed.join(", "))) }
    })
}

/// Reads `ruled:f=<genus>`.
fn parse_preset(s: &str) -> Result<f64, CliError> {
    let genus = s
        .strip_prefix("ruled:f=")
        .and_then(|g| g.parse::<u32>().ok())
        .ok_or_else(|| CliError::Config(format!("preset: expected ruled:f=<genus>, got {s:?}")))?;
    Ok(ruled_surface_a2(genus))
}

pub fn cmd_obstruct(args: &ObstructArgs, format: Format) -> Result<Finished, CliError> {
    let need = |v: Option<f64>, k: &str| v.ok_or_else(|| CliError::Config(format!("missing --{k}")));
    let a2 = match (&args.preset, args.a2) {
        (Some(_), Some(_)) => return Err(CliError::Config("--a2 and --preset are mutually exclusive".into())),
        (Some(p), None) => parse_preset(p)?,
        (None, a2) => need(a2, "a2")?,
    };
    let (a0, a1) = (need(args.a0, "a0")?, need(args.a1, "a1")?);
    let v: ObstructionVerdict = surface_obstruction(a0, a1, a2).map_err(|e| CliError::Config(e.to_string()))?;
    let report = match format {
        Format::Json => json(&v),
        Format::Csv => {
            let root = v.min_positive_root.map(float).unwrap_or_else(|| "none".into());
            format!(
                "a0,a1,a2,discriminant,min_positive_root,obstructed\n{},{},{},{},{root},{}\n",
                float(v.a0),
                float(v.a1),
                float(v.a2),
                float(v.discriminant),
                v.obstructed
            )
        }
    };
    Ok(Finished::ok(report))
}
