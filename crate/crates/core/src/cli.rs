//! Command-line front end: verification suites, simulation and current checks.

use crate::dualities::{Family, LimitCase, OrthoCase};
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::precise::Precision;
use crate::processes::{ProcessKind, ProcessSpec};
use crate::simulate::{current_monte_carlo, current_theorem_check, gillespie_run};
use crate::suite::{self, capacity_vectors, run_check, Report, SuiteConfig, DUALITY_CHECKS};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dynasep", version, about = "Dynamic exclusion processes: duality checks and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run verification checks and print one report per check.
    Verify {
        #[command(subcommand)]
        suite: VerifySuite,
    },
    /// Simulate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Check the height-current identity exactly and by Monte Carlo.
    Current(CurrentArgs),
}

#[derive(Debug, Subcommand)]
pub enum VerifySuite {
    /// Generator-level dualities.
    Duality(DualityArgs),
    /// Detailed balance and normalization of reversible measures.
    Reversibility(ReversibilityArgs),
    /// Orthogonality of duality functions.
    Orthogonality(OrthogonalityArgs),
    /// Special-function identities and recurrences.
    Recurrences(RecurrenceArgs),
    /// Quantum-group relations and generator reconstruction.
    Algebra(AlgebraArgs),
    /// Parameter degenerations.
    Limits(LimitArgs),
    /// Every acceptance check once.
    All(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML file with parameter grids; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: Format,
    /// Report zero wall time so outputs are byte-stable.
    #[arg(long)]
    pub no_timing: bool,
    /// Override the tolerance of every emitted check.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Arithmetic of the ill-conditioned checks.
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    /// Number of sites.
    #[arg(short = 'M', long = "sites")]
    pub sites: Option<usize>,
    /// Site capacities, comma separated; a single value is repeated over all sites.
    #[arg(short = 'N', long = "capacities", value_delimiter = ',')]
    pub capacities: Option<Vec<u32>>,
    #[arg(short = 'q', long = "q", allow_negative_numbers = true)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DualityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Process pair `A:B`, e.g. `lasep:rasep`.
    #[arg(long)]
    pub pair: Option<String>,
    /// Duality family, e.g. `K_R`, `R_v`, `K_hat`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(short = 'v', long = "v", allow_negative_numbers = true)]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReversibilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OrthogonalityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Orthogonality case or duality family name.
    #[arg(long, alias = "family")]
    pub case: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(short = 'v', long = "v", allow_negative_numbers = true)]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RecurrenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(short = 'q', long = "q")]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AlgebraArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(short = 'q', long = "q")]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Limit case name; all cases when absent.
    #[arg(long)]
    pub case: Option<String>,
    /// Probe scale: `|rho|`, `|lambda|` or `N`, `1 - q` for continuity cases, `v` for `v -> 0`.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long)]
    pub process: String,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial occupations, comma separated; `N_k / 2` (rounded down) per site by default.
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<u32>>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurrentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Initial configuration of the dynamic process.
    #[arg(long, value_delimiter = ',')]
    pub xi: Option<Vec<u32>>,
    /// Site of the height function (1-based).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Monte Carlo runs; 0 skips the sampled check.
    #[arg(long, default_value_t = 0)]
    pub mc_runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl LatticeArgs {
    /// Capacity vector from `-M`/`-N`, if any was given.
    pub fn capacities(&self) -> Result<Option<Vec<u32>>> {
        match (&self.capacities, self.sites) {
            (None, None) => Ok(None),
            (None, Some(m)) => Ok(Some(vec![1; m])),
            (Some(c), None) => Ok(Some(c.clone())),
            (Some(c), Some(m)) if c.len() == 1 => Ok(Some(vec![c[0]; m])),
            (Some(c), Some(m)) if c.len() == m => Ok(Some(c.clone())),
            (Some(c), Some(m)) => Err(usage(format!("-N has {} entries but -M is {m}", c.len()))),
        }
    }

    fn grid_capacities(&self) -> Result<Option<Vec<Vec<u32>>>> {
        if self.capacities.is_none() {
            if let Some(m) = self.sites {
                return Ok(Some(capacity_vectors(m, m, 2)));
            }
        }
        Ok(self.capacities()?.map(|c| vec![c]))
    }
}

fn load_config(common: &CommonArgs) -> Result<SuiteConfig> {
    let mut cfg = match &common.config {
        None => SuiteConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("config {}: {e}", p.display())))?;
            SuiteConfig::from_toml(&text)?
        }
    };
    if let Some(p) = common.precision {
        cfg.precision = p;
    }
    Ok(cfg)
}

fn set<T: Clone>(dst: &mut Vec<T>, v: Option<T>) {
    if let Some(x) = v {
        *dst = vec![x];
    }
}

fn parse_pair(s: &str) -> Result<(ProcessKind, ProcessKind)> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("--pair expects A:B, got '{s}'")))?;
    Ok((a.parse()?, b.parse()?))
}

fn pair_matches(f: Family, pair: (ProcessKind, ProcessKind)) -> bool {
    let (a, b) = f.process_kinds();
    (a, b) == pair || (b, a) == pair
}

fn duality_names(args: &DualityArgs) -> Result<Vec<&'static str>> {
    let pair = args.pair.as_deref().map(parse_pair).transpose()?;
    let family: Option<Family> = args.family.as_deref().map(str::parse).transpose()?;
    let mut names = Vec::new();
    for &name in DUALITY_CHECKS.iter() {
        let fam: Family = match name {
            "K_R_qinv" => Family::KR,
            n => n.parse()?,
        };
        if let Some(f) = family {
            if suite::duality_check_name(f) != name {
                continue;
            }
        }
        if let Some(p) = pair {
            if !pair_matches(fam, p) {
                continue;
            }
        }
        names.push(name);
    }
    if names.is_empty() {
        return Err(usage("no duality matches the given --family/--pair"));
    }
    Ok(names)
}

fn apply_duality_grid(
    cfg: &mut SuiteConfig,
    lat: &LatticeArgs,
    rho: Option<f64>,
    lambda: Option<f64>,
    v: Option<f64>,
) -> Result<()> {
    if let Some(c) = lat.grid_capacities()? {
        cfg.grid.capacities = c;
    }
    set(&mut cfg.grid.q, lat.q);
    set(&mut cfg.grid.rho, rho);
    set(&mut cfg.grid.lambda, lambda);
    set(&mut cfg.grid.v, v);
    set(&mut cfg.grid.hat_rho, rho);
    set(&mut cfg.grid.hat_lambda, lambda);
    set(&mut cfg.grid.hat_v, v);
    Ok(())
}

/// Runs a parsed command, writing reports to `out`; returns the exit code.
pub fn execute<W: Write>(cli: Cli, out: &mut W) -> Result<i32> {
    let (reports, common) = match cli.command {
        Command::Simulate(a) => return simulate(&a, out),
        Command::Current(a) => (current(&a)?, a.common),
        Command::Verify { suite } => verify(suite)?,
    };
    emit(reports, &common, out)
}

fn verify(s: VerifySuite) -> Result<(Vec<Report>, CommonArgs)> {
    Ok(match s {
        VerifySuite::Duality(a) => {
            let mut cfg = load_config(&a.common)?;
            apply_duality_grid(&mut cfg, &a.lattice, a.rho, a.lambda, a.v)?;
            let names = duality_names(&a)?;
            (suite::duality_suite(&cfg, &names), a.common)
        }
        VerifySuite::Reversibility(a) => {
            let mut cfg = load_config(&a.common)?;
            let kind: Option<ProcessKind> = a.process.as_deref().map(str::parse).transpose()?;
            if let Some(c) = a.lattice.capacities()? {
                cfg.reversibility_capacities = vec![c];
            }
            set(&mut cfg.grid.q, a.lattice.q);
            set(&mut cfg.grid.rho, a.rho);
            set(&mut cfg.grid.lambda, a.lambda);
            let reports = match kind {
                Some(k) if !matches!(k, ProcessKind::Asep | ProcessKind::AsepR | ProcessKind::AsepL) => {
                    single_reversibility(&cfg, k, a.rho.or(a.lambda))?
                }
                _ => {
                    let mut r = suite::reversibility_suite(&cfg, kind);
                    r.extend(suite::normalization_suite(&cfg, kind));
                    r
                }
            };
            (reports, a.common)
        }
        VerifySuite::Orthogonality(a) => {
            let mut cfg = load_config(&a.common)?;
            apply_duality_grid(&mut cfg, &a.lattice, a.rho, a.lambda, a.v)?;
            let cases: Vec<OrthoCase> = match a.case.as_deref() {
                None => OrthoCase::ALL.to_vec(),
                Some(s) => vec![parse_ortho_case(s)?],
            };
            (suite::orthogonality_suite(&cfg, &cases), a.common)
        }
        VerifySuite::Recurrences(a) => {
            let mut cfg = load_config(&a.common)?;
            set(&mut cfg.special_q, a.q);
            set(&mut cfg.special_rho, a.rho);
            (suite::criterion6(&cfg), a.common)
        }
        VerifySuite::Algebra(a) => {
            let mut cfg = load_config(&a.common)?;
            set(&mut cfg.algebra_q, a.q);
            set(&mut cfg.grid.rho, a.rho);
            (suite::criterion7(&cfg), a.common)
        }
        VerifySuite::Limits(a) => {
            let cfg = load_config(&a.common)?;
            let reports = match a.case.as_deref() {
                None if a.scale.is_none() => suite::criterion8(&cfg),
                None => suite::limits_suite(&cfg, &LimitCase::ALL, a.scale),
                Some(s) => suite::limits_suite(&cfg, &[s.parse::<LimitCase>()?], a.scale),
            };
            (reports, a.common)
        }
        VerifySuite::All(c) => (suite::run_all(&load_config(&c)?), c),
    })
}

fn parse_ortho_case(s: &str) -> Result<OrthoCase> {
    if let Some(c) = OrthoCase::ALL.iter().find(|c| c.name().eq_ignore_ascii_case(s)) {
        return Ok(*c);
    }
    let f: Family = s.parse()?;
    suite::ortho_case(f).ok_or_else(|| usage(format!("'{s}' has no orthogonality relation")))
}

fn single_reversibility(cfg: &SuiteConfig, kind: ProcessKind, boundary: Option<f64>) -> Result<Vec<Report>> {
    let m = suite::reversible_measure(kind)?;
    let mut out = Vec::new();
    for caps in &cfg.reversibility_capacities {
        let nn = caps.iter().sum::<u32>() as f64;
        let b = boundary.unwrap_or(match kind {
            ProcessKind::SsepR => -(nn + 0.6),
            ProcessKind::SsepL => nn + 0.4,
            _ => 0.0,
        });
        let params = crate::params!("process" => kind.name(), "capacities" => caps, "q" => 1.0, "boundary" => b);
        out.push(run_check(format!("c02.reversibility.{}", kind.name()), params, suite::tol::DETAILED_BALANCE, || {
            suite::reversibility_residual(&ProcessSpec::new(kind, 1.0, b, caps.clone())?, m)
        }));
    }
    Ok(out)
}

fn boundary_of(kind: ProcessKind, rho: Option<f64>, lambda: Option<f64>, caps: &[u32]) -> Result<f64> {
    let nn = caps.iter().sum::<u32>() as f64;
    Ok(match kind {
        ProcessKind::AsepR | ProcessKind::SsepR => rho.ok_or_else(|| usage(format!("{kind} needs --rho")))?,
        ProcessKind::AsepL | ProcessKind::SsepL => {
            lambda.or(rho).ok_or_else(|| usage(format!("{kind} needs --lambda (at least {nn} in size for ssep_l)")))?
        }
        _ => 0.0,
    })
}

fn simulate<W: Write>(a: &SimulateArgs, out: &mut W) -> Result<i32> {
    let kind: ProcessKind = a.process.parse()?;
    let caps = a.lattice.capacities()?.ok_or_else(|| usage("simulate needs -M and/or -N"))?;
    let q = if kind.is_symmetric() { 1.0 } else { a.lattice.q.ok_or_else(|| usage("simulate needs -q"))? };
    let spec = ProcessSpec::new(kind, q, boundary_of(kind, a.rho, a.lambda, &caps)?, caps.clone())?;
    let init = a.initial.clone().unwrap_or_else(|| caps.iter().map(|c| c / 2).collect());
    let traj = gillespie_run(&spec, &Configuration::new(init, caps)?, a.t_end, a.seed)?;
    match &a.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            traj.write_csv(BufWriter::new(f))?;
        }
        None => traj.write_csv(out)?,
    }
    Ok(EXIT_PASS)
}

fn current(a: &CurrentArgs) -> Result<Vec<Report>> {
    let caps = a.lattice.capacities()?.unwrap_or_else(|| suite::CURRENT_CAPS.to_vec());
    let q = a.lattice.q.unwrap_or(suite::CURRENT_Q);
    let rho = a.rho.unwrap_or(suite::CURRENT_RHO);
    let xi = a.xi.clone().unwrap_or_else(|| {
        if caps == suite::CURRENT_CAPS {
            suite::CURRENT_XI.to_vec()
        } else {
            vec![0; caps.len()]
        }
    });
    let params = crate::params!("capacities" => caps, "q" => q, "rho" => rho, "xi" => xi, "k" => a.k, "t" => a.t);
    let exact = current_theorem_check(&caps, q, rho, &xi, a.k, a.t);
    let mut reports = Vec::new();
    let mut p = params.clone();
    if let Ok(c) = &exact {
        p.insert("lhs".into(), json!(c.lhs));
        p.insert("rhs".into(), json!(c.rhs));
    }
    reports.push(run_check("c09.current.exact", p, suite::tol::CURRENT, || {
        exact.as_ref().map(|c| c.residual()).map_err(Clone::clone)
    }));
    if a.mc_runs > 0 {
        let mut p = params;
        p.insert("runs".into(), json!(a.mc_runs));
        p.insert("seed".into(), json!(a.seed));
        reports.push(run_check("c09.current.monte_carlo_sigmas", p, suite::tol::SIGMAS, || {
            let ex = current_theorem_check(&caps, q, rho, &xi, a.k, a.t)?;
            let est = current_monte_carlo(&caps, q, rho, &xi, a.k, a.t, a.mc_runs, a.seed)?;
            Ok((est.mean - ex.lhs).abs() / est.std_err.max(1e-15))
        }));
    }
    Ok(reports)
}

/// Exit code for a batch of reports.
pub fn exit_code(reports: &[Report]) -> i32 {
    if reports.iter().any(|r| r.numerical_error) {
        EXIT_NUMERICAL
    } else if reports.iter().all(|r| r.pass) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn emit<W: Write>(mut reports: Vec<Report>, common: &CommonArgs, out: &mut W) -> Result<i32> {
    for r in reports.iter_mut() {
        if let Some(t) = common.tol {
            r.tol = t;
            r.pass = r.residual <= t;
        }
        if common.no_timing {
            r.seconds = 0.0;
        }
    }
    reports.sort_by(|a, b| a.check.cmp(&b.check));
    match common.format {
        Format::Jsonl => write_jsonl(&reports, out)?,
        Format::Csv => write_csv(&reports, out)?,
    }
    Ok(exit_code(&reports))
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("output: {e}"))
}

pub fn write_jsonl<W: Write>(reports: &[Report], out: &mut W) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut *out, r).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// CSV with one `param.<key>` column per parameter seen in any report.
pub fn write_csv<W: Write>(reports: &[Report], out: &mut W) -> Result<()> {
    let keys: BTreeSet<&String> = reports.iter().flat_map(|r| r.params.keys()).collect();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["check".to_string()];
    header.extend(keys.iter().map(|k| format!("param.{k}")));
    header.extend(["residual", "tol", "pass", "seconds", "error"].map(String::from));
    w.write_record(&header).map_err(io_err)?;
    for r in reports {
        let mut row = vec![r.check.clone()];
        row.extend(keys.iter().map(|k| r.params.get(*k).map(cell).unwrap_or_default()));
        row.push(if r.residual.is_finite() { format!("{:e}", r.residual) } else { String::new() });
        row.push(format!("{:e}", r.tol));
        row.push(r.pass.to_string());
        row.push(r.seconds.to_string());
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Entry point of the binary: parses `args` and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let result = crate::simulate::thread_pool().and_then(|pool| {
        pool.install(|| {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            execute(cli, &mut lock)
        })
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_string(args: &[&str]) -> (i32, String) {
        let cli = Cli::try_parse_from(std::iter::once("dynasep").chain(args.iter().copied())).expect("valid flags");
        let mut buf = Vec::new();
        let code =
            execute(cli, &mut buf).unwrap_or_else(|e| if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE });
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn duality_example_passes() {
        let (code, out) = run_to_string(&[
            "verify",
            "duality",
            "--pair",
            "lasep:rasep",
            "--family",
            "R_v",
            "-M",
            "2",
            "-N",
            "1,2",
            "-q",
            "0.7",
            "--rho",
            "0.3",
            "--lambda",
            "-0.4",
            "-v",
            "1.3",
            "--tol",
            "1e-9",
        ]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.lines().count(), 1);
        assert!(out.contains("\"check\":\"c04.duality.R_v\""));
    }

    #[test]
    fn reversibility_example_is_tight() {
        let (code, out) = run_to_string(&[
            "verify",
            "reversibility",
            "--process",
            "rasep",
            "-M",
            "3",
            "-N",
            "1,2,1",
            "-q",
            "0.6",
            "--rho",
            "0.4",
        ]);
        assert_eq!(code, 0);
        for line in out.lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            assert!(v["residual"].as_f64().unwrap() < 1e-12, "{line}");
        }
    }

    #[test]
    fn mismatched_pair_is_a_usage_error() {
        let (code, _) = run_to_string(&["verify", "duality", "--pair", "asep:asep_l", "--family", "K_R"]);
        assert_eq!(code, EXIT_USAGE);
        assert_eq!(run(["dynasep", "verify", "duality", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn tight_tolerance_fails() {
        let (code, _) = run_to_string(&["verify", "limits", "--case", "WR_to_w_minus", "--tol", "0"]);
        assert_eq!(code, EXIT_FAIL);
    }

    #[test]
    fn pole_is_a_numerical_error() {
        let (code, out) = run_to_string(&[
            "verify",
            "orthogonality",
            "--case",
            "R_hat",
            "-N",
            "1,1",
            "--rho",
            "-1",
            "--lambda",
            "3",
            "-v",
            "0.6",
        ]);
        assert_eq!(code, EXIT_NUMERICAL, "{out}");
    }

    #[test]
    fn csv_flattens_params() {
        let (_, out) = run_to_string(&[
            "verify",
            "reversibility",
            "--process",
            "rasep",
            "-N",
            "1,1,1",
            "-q",
            "0.6",
            "--rho",
            "0.4",
            "--format",
            "csv",
            "--no-timing",
        ]);
        let header = out.lines().next().unwrap();
        assert!(header.starts_with("check,param.capacities,param.lambda,param.q,param.rho,residual"), "{header}");
    }
}
