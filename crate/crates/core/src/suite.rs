//! Verification checks shared by the command line and the acceptance
//! target. Each check reduces a parameter grid to one residual.

use crate::dualities::{
    closure_residual, d_tazrp, degeneration_residual, duality_residual, family_duality_residual,
    invariant_identity_residual, orthogonality_residual, r_product, r_sum, racah_inversion_residual,
    racah_symmetry_residual, tazrp_pair, DualityEvaluator, DualityParams, Family, LimitCase, OrthoCase,
};
use crate::error::{Error, Result};
use crate::lattice::enumerate;
use crate::lattice::Configuration;
use crate::precise::{self, Dd, Precision};
use crate::processes::{
    build_generator, detailed_balance_residual, measure_vector, MeasureKind, ProcessKind, ProcessSpec,
};
use crate::qspecial::{k_one, q_bracket, r_site, recurrence_residual, sign_pow, w_site, Recurrence};
use crate::simulate::{
    chi_square, current_monte_carlo, current_theorem_check, gillespie_run, histogram, holding_times, sample_endpoints,
    McEstimate,
};
use crate::uqsl2::{
    casimir_decomposition_residual, casimir_generator_residual, casimir_residual, relation_residual, rep_matrices,
    star_residual, summed_generator_residual, y_coproduct_residual, y_eigen_residual, y_site_eigen_residual,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::time::Instant;

/// One verification outcome.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub check: String,
    pub params: BTreeMap<String, Value>,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub numerical_error: bool,
}

impl Report {
    /// Zeroes the wall time so reruns are byte-identical.
    pub fn without_timing(mut self) -> Self {
        self.seconds = 0.0;
        self
    }
}

/// Runs `f`, timing it and folding errors into a failed report.
pub fn run_check<F>(check: impl Into<String>, params: BTreeMap<String, Value>, tol: f64, f: F) -> Report
where
    F: FnOnce() -> Result<f64>,
{
    let start = Instant::now();
    let out = f();
    let seconds = start.elapsed().as_secs_f64();
    let check = check.into();
    match out {
        Ok(r) => {
            Report { check, params, residual: r, tol, pass: r <= tol, seconds, error: None, numerical_error: false }
        }
        Err(e) => Report {
            check,
            params,
            residual: f64::NAN,
            tol,
            pass: false,
            seconds,
            numerical_error: e.is_numerical(),
            error: Some(e.to_string()),
        },
    }
}

/// Builds a parameter record from `(key, value)` pairs.
#[macro_export]
macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = std::collections::BTreeMap::<String, serde_json::Value>::new();
        $( m.insert($k.to_string(), serde_json::json!($v)); )*
        m
    }};
}

/// Largest residual over a grid; the first error aborts.
fn max_over<T, F>(items: &[T], f: F) -> Result<f64>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let vals: Vec<f64> = items.par_iter().map(&f).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Parameter grids; every field can be overridden from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub q: Vec<f64>,
    pub rho: Vec<f64>,
    pub lambda: Vec<f64>,
    pub v: Vec<f64>,
    /// Capacity vectors for the duality and orthogonality grids.
    pub capacities: Vec<Vec<u32>>,
    /// Distances `|rho| - |N|`, `|lambda| - |N|` used by the symmetric families.
    pub hat_offsets: Vec<f64>,
    pub hat_v: Vec<f64>,
    /// Explicit symmetric boundaries; empty means derived from `hat_offsets`.
    pub hat_rho: Vec<f64>,
    pub hat_lambda: Vec<f64>,
}

/// All capacity vectors with `1..=max_sites` sites and entries in `1..=max_cap`.
pub fn capacity_vectors(min_sites: usize, max_sites: usize, max_cap: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for m in min_sites..=max_sites {
        let mut cur = vec![1u32; m];
        loop {
            out.push(cur.clone());
            let mut i = m;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if cur[i] < max_cap {
                    cur[i] += 1;
                    cur[i + 1..].iter_mut().for_each(|c| *c = 1);
                    break;
                }
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX {
                break;
            }
        }
    }
    out
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            q: vec![0.5, 0.8, 1.25],
            rho: vec![-1.2, 0.0, 0.7],
            lambda: vec![-1.2, 0.0, 0.7],
            v: vec![0.6, 1.5],
            capacities: capacity_vectors(1, 3, 2),
            hat_offsets: vec![0.4, 1.3],
            hat_v: vec![0.6, 1.5],
            hat_rho: Vec::new(),
            hat_lambda: Vec::new(),
        }
    }
}

/// Settings of the whole suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub grid: Grid,
    /// Largest chain and capacity of the generator sanity sweep.
    pub sanity_max_sites: usize,
    pub sanity_max_capacity: u32,
    /// Three-site capacities for reversibility and normalization.
    pub reversibility_capacities: Vec<Vec<u32>>,
    pub limit_scale: f64,
    pub q_to_one_scale: f64,
    pub v_zero_scale: f64,
    pub monte_carlo_runs: usize,
    pub chi_square_runs: usize,
    pub seed: u64,
    /// `q` and `rho` of the recurrence and reflection checks.
    pub special_q: Vec<f64>,
    pub special_rho: Vec<f64>,
    pub algebra_q: Vec<f64>,
    /// Arithmetic for the orthogonality, recurrence and reflection checks.
    pub precision: Precision,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            grid: Grid::default(),
            sanity_max_sites: 4,
            sanity_max_capacity: 3,
            reversibility_capacities: capacity_vectors(3, 3, 3),
            limit_scale: 40.0,
            q_to_one_scale: 1e-4,
            v_zero_scale: 1e-6,
            monte_carlo_runs: 100_000,
            chi_square_runs: 100_000,
            seed: 20_240_601,
            special_q: vec![0.4, 0.8, 1.5],
            special_rho: vec![-1.1, 0.3, 2.0],
            algebra_q: vec![0.5, 0.8, 1.25],
            precision: Precision::DoubleDouble,
        }
    }
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }
}

/// Tolerances of the acceptance criteria.
pub mod tol {
    pub const ROW_SUM: f64 = 1e-12;
    pub const DETAILED_BALANCE: f64 = 1e-11;
    pub const NORMALIZATION: f64 = 1e-11;
    pub const DUALITY: f64 = 1e-9;
    pub const ORTHOGONALITY: f64 = 1e-9;
    pub const SPECIAL: f64 = 1e-10;
    pub const ALGEBRA_RELATIONS: f64 = 1e-13;
    pub const ALGEBRA_GENERATOR: f64 = 1e-12;
    pub const ALGEBRA_EIGEN: f64 = 1e-11;
    pub const CURRENT: f64 = 1e-8;
    pub const SIGMAS: f64 = 3.0;
    pub const CHI_P: f64 = 0.01;
}

fn caps_json(c: &[Vec<u32>]) -> Value {
    json!(c)
}

// ---------------------------------------------------------------- 1

fn boundary_for(kind: ProcessKind, caps: &[u32]) -> f64 {
    let nn: u32 = caps.iter().sum();
    match kind {
        ProcessKind::AsepR | ProcessKind::AsepL => 0.7,
        ProcessKind::SsepR => -(nn as f64 + 0.6),
        ProcessKind::SsepL => nn as f64 + 0.4,
        _ => 0.0,
    }
}

/// Row sums, sign of off-diagonal rates and particle conservation.
pub fn generator_sanity(spec: &ProcessSpec) -> Result<f64> {
    let sector = enumerate(&spec.capacities, None)?;
    let gen = build_generator(spec, &sector)?;
    let totals = sector.totals();
    let mut row = vec![0.0; gen.dim()];
    let mut worst: f64 = 0.0;
    for &(i, j, r) in gen.off_diagonal() {
        if r < 0.0 || totals[i] != totals[j] {
            return Ok(f64::INFINITY);
        }
        row[i] += r;
    }
    for (i, d) in gen.diagonal().iter().enumerate() {
        let scale = (-d).abs().max(1.0);
        worst = worst.max((row[i] + d).abs() / scale);
    }
    Ok(worst)
}

pub fn criterion1(cfg: &SuiteConfig) -> Vec<Report> {
    let caps = capacity_vectors(1, cfg.sanity_max_sites, cfg.sanity_max_capacity);
    let qs = [0.5, 0.8, 1.25];
    ProcessKind::ALL
        .iter()
        .map(|&kind| {
            let pts: Vec<(Vec<u32>, f64)> = caps
                .iter()
                .flat_map(|c| {
                    let qq: Vec<f64> = if kind.is_symmetric() { vec![1.0] } else { qs.to_vec() };
                    qq.into_iter().map(move |q| (c.clone(), q))
                })
                .collect();
            run_check(
                format!("c01.generator.{}", kind.name()),
                params!("max_sites" => cfg.sanity_max_sites, "max_capacity" => cfg.sanity_max_capacity, "q" => qs, "points" => pts.len()),
                tol::ROW_SUM,
                || max_over(&pts, |(c, q)| generator_sanity(&ProcessSpec::new(kind, *q, boundary_for(kind, c), c.clone())?)),
            )
        })
        .collect()
}

// ---------------------------------------------------------------- 2, 3

/// Reversible measure matching a process kind.
pub fn reversible_measure(kind: ProcessKind) -> Result<MeasureKind> {
    Ok(match kind {
        ProcessKind::Asep => MeasureKind::W,
        ProcessKind::AsepR => MeasureKind::WR,
        ProcessKind::AsepL => MeasureKind::WL,
        ProcessKind::Ssep => MeasureKind::WHat,
        ProcessKind::SsepR => MeasureKind::WHatR,
        ProcessKind::SsepL => MeasureKind::WHatL,
        _ => return Err(Error::InvalidArgument(format!("{kind} has no reversible measure"))),
    })
}

/// Detailed-balance residual of `measure` for `spec` on the full space.
pub fn reversibility_residual(spec: &ProcessSpec, measure: MeasureKind) -> Result<f64> {
    let sector = enumerate(&spec.capacities, None)?;
    let gen = build_generator(spec, &sector)?;
    let mu = measure_vector(measure, spec, &sector)?;
    Ok(detailed_balance_residual(&gen, &mu))
}

/// `|sum W - 1|` over the full space.
pub fn normalization_residual(spec: &ProcessSpec, measure: MeasureKind) -> Result<f64> {
    let sector = enumerate(&spec.capacities, None)?;
    Ok((measure_vector(measure, spec, &sector)?.iter().sum::<f64>() - 1.0).abs())
}

fn dynamic_points(cfg: &SuiteConfig, kind: ProcessKind) -> Vec<ProcessSpec> {
    let bounds: Vec<f64> = match kind {
        ProcessKind::AsepR => cfg.grid.rho.clone(),
        ProcessKind::AsepL => cfg.grid.lambda.clone(),
        _ => vec![0.0],
    };
    let mut out = Vec::new();
    for c in &cfg.reversibility_capacities {
        for &q in &cfg.grid.q {
            for &b in &bounds {
                if let Ok(s) = ProcessSpec::new(kind, q, b, c.clone()) {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Reversibility checks, optionally restricted to one process kind.
pub fn reversibility_suite(cfg: &SuiteConfig, only: Option<ProcessKind>) -> Vec<Report> {
    [
        (ProcessKind::Asep, MeasureKind::W, "asep.w"),
        (ProcessKind::AsepR, MeasureKind::WR, "asep_r.W_R"),
        (ProcessKind::AsepL, MeasureKind::WL, "asep_l.W_L"),
        (ProcessKind::AsepR, MeasureKind::WRInv, "asep_r.W_R_inv"),
    ]
    .iter()
    .filter(|(k, _, _)| only.is_none_or(|o| o == *k))
    .map(|&(kind, m, name)| {
        let pts = dynamic_points(cfg, kind);
        run_check(
            format!("c02.reversibility.{name}"),
            params!("capacities" => caps_json(&cfg.reversibility_capacities), "q" => cfg.grid.q, "rho" => cfg.grid.rho, "lambda" => cfg.grid.lambda),
            tol::DETAILED_BALANCE,
            || max_over(&pts, |s| reversibility_residual(s, m)),
        )
    })
    .collect()
}

pub fn criterion2(cfg: &SuiteConfig) -> Vec<Report> {
    reversibility_suite(cfg, None)
}

pub fn normalization_suite(cfg: &SuiteConfig, only: Option<ProcessKind>) -> Vec<Report> {
    [(ProcessKind::AsepR, MeasureKind::WR, "W_R"), (ProcessKind::AsepL, MeasureKind::WL, "W_L")]
        .iter()
        .filter(|(k, _, _)| only.is_none_or(|o| o == *k))
        .map(|&(kind, m, name)| {
            let pts = dynamic_points(cfg, kind);
            run_check(
                format!("c03.normalization.{name}"),
                params!("capacities" => caps_json(&cfg.reversibility_capacities), "q" => cfg.grid.q, "rho" => cfg.grid.rho, "lambda" => cfg.grid.lambda),
                tol::NORMALIZATION,
                || max_over(&pts, |s| normalization_residual(s, m)),
            )
        })
        .collect()
}

pub fn criterion3(cfg: &SuiteConfig) -> Vec<Report> {
    normalization_suite(cfg, None)
}

// ---------------------------------------------------------------- 4

/// Names of the duality checks, in report order.
pub const DUALITY_CHECKS: [&str; 15] = [
    "K_R",
    "K_R_qinv",
    "K_L",
    "K_L_v",
    "R_v",
    "P_v_R",
    "P_prime_R",
    "K_qtm",
    "K_aff",
    "D_tri",
    "D_tri_prime",
    "D_tazrp",
    "R_hat",
    "P_hat_R",
    "K_hat",
];

fn hatted(f: Family) -> bool {
    matches!(f, Family::RHat | Family::PHatR | Family::KHat)
}

/// Grid points relevant to `family`.
pub fn duality_points(family: Family, grid: &Grid) -> Vec<DualityParams> {
    let mut out = Vec::new();
    for caps in &grid.capacities {
        let nn: f64 = caps.iter().sum::<u32>() as f64;
        if hatted(family) {
            let bounds: Vec<(f64, f64)> = if grid.hat_rho.is_empty() && grid.hat_lambda.is_empty() {
                grid.hat_offsets.iter().map(|&off| (-(nn + off), nn + off)).collect()
            } else {
                let rs = if grid.hat_rho.is_empty() { vec![-(nn + 0.6)] } else { grid.hat_rho.clone() };
                let ls = if grid.hat_lambda.is_empty() { vec![nn + 0.4] } else { grid.hat_lambda.clone() };
                rs.iter().flat_map(|&r| ls.iter().map(move |&l| (r, l))).collect()
            };
            for &(rho, lambda) in &bounds {
                for &v in &grid.hat_v {
                    out.push(DualityParams { q: 1.0, rho, lambda, v, capacities: caps.clone() });
                }
            }
            continue;
        }
        let uses_rho = matches!(family, Family::KR | Family::RvProduct | Family::RvSum | Family::PvR | Family::PPrimeR);
        let uses_lambda = matches!(family, Family::KL | Family::KLv | Family::RvProduct | Family::RvSum);
        let rhos = if uses_rho { grid.rho.clone() } else { vec![0.0] };
        let lams = if uses_lambda { grid.lambda.clone() } else { vec![0.0] };
        let vs = if family.uses_v() { grid.v.clone() } else { vec![1.0] };
        for &q in &grid.q {
            for &rho in &rhos {
                for &lambda in &lams {
                    for &v in &vs {
                        out.push(DualityParams { q, rho, lambda, v, capacities: caps.clone() });
                    }
                }
            }
        }
    }
    out
}

/// `K_R` at `1/q` between `asep(1/q)` and `asep_r(q)`.
pub fn k_r_inverse_residual(p: &DualityParams) -> Result<f64> {
    let d = DualityEvaluator::new(Family::KR, DualityParams { q: 1.0 / p.q, ..p.clone() })?;
    let a = ProcessSpec::new(ProcessKind::Asep, 1.0 / p.q, 0.0, p.capacities.clone())?;
    let b = ProcessSpec::new(ProcessKind::AsepR, p.q, p.rho, p.capacities.clone())?;
    let s = enumerate(&p.capacities, None)?;
    duality_residual(&a, &b, &d, &s, &s)
}

/// Zero-range duality on `2..=3` sites and totals up to 3.
pub fn tazrp_residual(q: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for m in 2..=3 {
        for nz in 0..=3 {
            for nx in 0..=3 {
                let (a, b, sa, sb) = tazrp_pair(q, m, nz, nx)?;
                let d = DualityEvaluator::new(
                    Family::DTazrp,
                    DualityParams { q, rho: 0.0, lambda: 0.0, v: 1.0, capacities: vec![1; m] },
                )?;
                worst = worst.max(duality_residual(&a, &b, &d, &sa, &sb)?);
            }
        }
    }
    Ok(worst)
}

fn family_by_check(name: &str) -> Option<Family> {
    Some(match name {
        "K_R" | "K_R_qinv" => Family::KR,
        "K_L" => Family::KL,
        "K_L_v" => Family::KLv,
        "R_v" => Family::RvProduct,
        "P_v_R" => Family::PvR,
        "P_prime_R" => Family::PPrimeR,
        "K_qtm" => Family::KQtm,
        "K_aff" => Family::KAff,
        "D_tri" => Family::DTri,
        "D_tri_prime" => Family::DTriPrime,
        "D_tazrp" => Family::DTazrp,
        "R_hat" => Family::RHat,
        "P_hat_R" => Family::PHatR,
        "K_hat" => Family::KHat,
        _ => return None,
    })
}

/// Duality residual of one named check at one parameter point.
pub fn duality_check_at(name: &str, p: &DualityParams) -> Result<f64> {
    match name {
        "K_R_qinv" => k_r_inverse_residual(p),
        "D_tazrp" => tazrp_residual(p.q),
        _ => {
            let f = family_by_check(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown duality check '{name}'")))?;
            family_duality_residual(&DualityEvaluator::new(f, p.clone())?)
        }
    }
}

/// Duality checks named in `names` (see [`DUALITY_CHECKS`]).
pub fn duality_suite(cfg: &SuiteConfig, names: &[&str]) -> Vec<Report> {
    names
        .iter()
        .map(|&name| {
            let Some(fam) = family_by_check(name) else {
                return run_check(format!("c04.duality.{name}"), BTreeMap::new(), tol::DUALITY, || {
                    Err(Error::InvalidArgument(format!("unknown duality check '{name}'")))
                });
            };
            let pts: Vec<DualityParams> = if name == "D_tazrp" {
                cfg.grid
                    .q
                    .iter()
                    .map(|&q| DualityParams { q, rho: 0.0, lambda: 0.0, v: 1.0, capacities: vec![1] })
                    .collect()
            } else {
                duality_points(fam, &cfg.grid)
            };
            run_check(
                format!("c04.duality.{name}"),
                grid_params(&cfg.grid, hatted(fam), pts.len()),
                tol::DUALITY,
                || max_over(&pts, |p| duality_check_at(name, p)),
            )
        })
        .collect()
}

pub fn criterion4(cfg: &SuiteConfig) -> Vec<Report> {
    duality_suite(cfg, &DUALITY_CHECKS)
}

/// Check name of a duality family.
pub fn duality_check_name(f: Family) -> &'static str {
    match f {
        Family::KR => "K_R",
        Family::KL => "K_L",
        Family::KLv => "K_L_v",
        Family::RvProduct | Family::RvSum => "R_v",
        Family::PvR => "P_v_R",
        Family::PPrimeR => "P_prime_R",
        Family::KQtm => "K_qtm",
        Family::KAff => "K_aff",
        Family::DTri => "D_tri",
        Family::DTriPrime => "D_tri_prime",
        Family::DTazrp => "D_tazrp",
        Family::RHat => "R_hat",
        Family::PHatR => "P_hat_R",
        Family::KHat => "K_hat",
    }
}

fn grid_params(g: &Grid, hat: bool, points: usize) -> BTreeMap<String, Value> {
    if hat {
        params!("capacities" => caps_json(&g.capacities), "hat_offsets" => g.hat_offsets, "v" => g.hat_v, "q" => 1.0, "points" => points)
    } else {
        params!("capacities" => caps_json(&g.capacities), "q" => g.q, "rho" => g.rho, "lambda" => g.lambda, "v" => g.v, "points" => points)
    }
}

// ---------------------------------------------------------------- 5

fn ortho_family(c: OrthoCase) -> Family {
    match c {
        OrthoCase::KR => Family::KR,
        OrthoCase::KL => Family::KL,
        OrthoCase::Rv => Family::RvProduct,
        OrthoCase::PvR => Family::PvR,
        OrthoCase::KQtm => Family::KQtm,
        OrthoCase::KAff => Family::KAff,
        OrthoCase::RHat => Family::RHat,
        OrthoCase::PHatR => Family::PHatR,
        OrthoCase::KHat => Family::KHat,
    }
}

pub fn orthogonality_suite(cfg: &SuiteConfig, cases: &[OrthoCase]) -> Vec<Report> {
    cases
        .iter()
        .map(|&c| {
            let pts = duality_points(ortho_family(c), &cfg.grid);
            let dd = cfg.precision == Precision::DoubleDouble && precise::supports(c);
            let mut params = grid_params(&cfg.grid, c.is_symmetric(), pts.len());
            params.insert("precision".into(), json!(if dd { "double-double" } else { "double" }));
            run_check(format!("c05.orthogonality.{}", c.name()), params, tol::ORTHOGONALITY, || {
                max_over(&pts, |p| {
                    if dd {
                        precise::orthogonality_residual::<Dd>(c, p.q, p.rho, p.lambda, p.v, &p.capacities)
                    } else {
                        orthogonality_residual(c, p)
                    }
                })
            })
        })
        .collect()
}

pub fn criterion5(cfg: &SuiteConfig) -> Vec<Report> {
    orthogonality_suite(cfg, &OrthoCase::ALL)
}

/// Orthogonality case of a family, if it has one.
pub fn ortho_case(f: Family) -> Option<OrthoCase> {
    OrthoCase::ALL.iter().copied().find(|&c| ortho_family(c) == f || (f == Family::RvSum && c == OrthoCase::Rv))
}

// ---------------------------------------------------------------- 6

/// One-site Racah function against its expansion over Krawtchouk products.
pub fn racah_sum_residual(lam: f64, rho: f64, v: f64, n: u32, q: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for y in 0..=n {
        for x in 0..=n {
            let direct = r_site(y, x, q.powf(lam), q.powf(rho), v, n, q)?;
            let mut sum = 0.0;
            let mut scale: f64 = 0.0;
            for m in 0..=n {
                let t = (-v).powi(m as i32) * k_one(m, y, lam, n, 1.0 / q)? * k_one(m, x, rho, n, q)? * w_site(m, n, q);
                sum += t;
                scale = scale.max(t.abs());
            }
            worst = worst.max((direct - sum).abs() / scale.max(1.0));
        }
    }
    Ok(worst)
}

/// Nested Racah product against the sum over `K_L K_R w`.
pub fn racah_product_sum_residual(p: &DualityParams) -> Result<f64> {
    let caps = &p.capacities[..];
    let s = enumerate(caps, None)?;
    let mut worst: f64 = 0.0;
    for z in s.states() {
        for x in s.states() {
            let a = r_product(z, x, caps, p.q.powf(p.lambda), p.q.powf(p.rho), p.v, p.q)?;
            let b = r_sum(z, x, caps, p.lambda, p.rho, p.v, p.q)?;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// `k(n, x; -rho) = (-1)^n k(n, N - x; rho)`.
pub fn reflection_residual(n_max: u32, rho: f64, q: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        for x in 0..=n_max {
            let a = k_one(n, x, -rho, n_max, q)?;
            let b = sign_pow(n) * k_one(n, n_max - x, rho, n_max, q)?;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// `(q^2 + q^-2)[p][p+2] - [p]^2 - [p+2]^2 + (q + q^-1)^2 = 0`.
pub fn bracket_identity_residual(p: f64, q: f64) -> f64 {
    let (a, b) = (q_bracket(p, q), q_bracket(p + 2.0, q));
    let terms = [(q * q + 1.0 / (q * q)) * a * b, a * a, b * b, (q + 1.0 / q).powi(2)];
    let scale = terms.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    (terms[0] - terms[1] - terms[2] + terms[3]).abs() / scale
}

/// `|A||B| = sum_k sum_{j>k} (A_k B_j + A_j B_k) + sum_k A_k B_k` on random vectors.
pub fn product_identity_residual(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: i64 = 0;
    for _ in 0..samples {
        let m = rng.random_range(1..=6);
        let a: Vec<i64> = (0..m).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<i64> = (0..m).map(|_| rng.random_range(0..5)).collect();
        let lhs = a.iter().sum::<i64>() * b.iter().sum::<i64>();
        let mut rhs = 0;
        for k in 0..m {
            rhs += a[k] * b[k];
            for j in k + 1..m {
                rhs += a[k] * b[j] + a[j] * b[k];
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    worst as f64
}

pub fn criterion6(cfg: &SuiteConfig) -> Vec<Report> {
    let qs = cfg.special_q.clone();
    let rhos = cfg.special_rho.clone();
    let mut pts = Vec::new();
    for &q in &qs {
        for &rho in &rhos {
            for n in 1..=4u32 {
                pts.push((q, rho, n));
            }
        }
    }
    let mut out = vec![
        run_check(
            "c06.special.racah_krawtchouk_sum",
            params!("q" => cfg.grid.q, "lambda" => cfg.grid.lambda, "rho" => cfg.grid.rho, "v" => cfg.grid.v, "n_max" => 4),
            tol::SPECIAL,
            || {
                let mut p = Vec::new();
                for &q in &cfg.grid.q {
                    for &l in &cfg.grid.lambda {
                        for &r in &cfg.grid.rho {
                            for &v in &cfg.grid.v {
                                for n in 1..=4 {
                                    p.push((l, r, v, n, q));
                                }
                            }
                        }
                    }
                }
                max_over(&p, |&(l, r, v, n, q)| racah_sum_residual(l, r, v, n, q))
            },
        ),
        run_check("c06.special.racah_product_vs_sum", grid_params(&cfg.grid, false, 0), tol::SPECIAL, || {
            max_over(&duality_points(Family::RvProduct, &cfg.grid), racah_product_sum_residual)
        }),
    ];
    for (name, which) in [
        ("three_term", Recurrence::ThreeTerm),
        ("rho_plus_2", Recurrence::RhoPlus2),
        ("rho_minus_2", Recurrence::RhoMinus2),
    ] {
        out.push(run_check(
            format!("c06.special.recurrence.{name}"),
            params!("q" => qs, "rho" => rhos, "n_max" => 4, "precision" => cfg.precision),
            tol::SPECIAL,
            || {
                max_over(&pts, |&(q, rho, nm)| {
                    let mut w: f64 = 0.0;
                    for n in 0..=nm {
                        for x in 0..=nm {
                            let r = match cfg.precision {
                                Precision::Double => recurrence_residual(which, n, x, rho, nm, q)?,
                                Precision::DoubleDouble => precise::recurrence_residual::<Dd>(which, n, x, rho, nm, q)?,
                            };
                            w = w.max(r);
                        }
                    }
                    Ok(w)
                })
            },
        ));
    }
    out.push(run_check("c06.special.weight_q_inverse", params!("q" => qs, "n_max" => 6), tol::SPECIAL, || {
        let mut w: f64 = 0.0;
        for &q in &qs {
            for nm in 1..=6 {
                for n in 0..=nm {
                    let (a, b) = (w_site(n, nm, q), w_site(n, nm, 1.0 / q));
                    w = w.max((a - b).abs() / a.abs().max(1.0));
                }
            }
        }
        Ok(w)
    }));
    out.push(run_check(
        "c06.special.reflection",
        params!("q" => qs, "rho" => rhos, "n_max" => 4, "precision" => cfg.precision),
        tol::SPECIAL,
        || {
            max_over(&pts, |&(q, rho, nm)| match cfg.precision {
                Precision::Double => reflection_residual(nm, rho, q),
                Precision::DoubleDouble => precise::reflection_residual::<Dd>(nm, rho, q),
            })
        },
    ));
    out.push(run_check("c06.special.bracket_identity", params!("q" => qs, "samples" => 200), tol::SPECIAL, || {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut w: f64 = 0.0;
        for _ in 0..200 {
            let p: f64 = rng.random_range(-6.0..6.0);
            for &q in &qs {
                w = w.max(bracket_identity_residual(p, q));
            }
        }
        Ok(w)
    }));
    out.push(run_check("c06.special.product_identity", params!("samples" => 500, "seed" => cfg.seed), 0.0, || {
        Ok(product_identity_residual(500, cfg.seed))
    }));
    out.push(run_check("c06.special.invariant_factors", grid_params(&cfg.grid, false, 0), tol::SPECIAL, || {
        max_over(&duality_points(Family::RvProduct, &cfg.grid), invariant_identity_residual)
    }));
    out.push(run_check("c06.special.racah_symmetry", grid_params(&cfg.grid, false, 0), tol::SPECIAL, || {
        max_over(&duality_points(Family::RvProduct, &cfg.grid), racah_symmetry_residual)
    }));
    out.push(run_check("c06.special.racah_inversion", grid_params(&cfg.grid, false, 0), 1e-8, || {
        max_over(&duality_points(Family::RvProduct, &cfg.grid), racah_inversion_residual)
    }));
    out.push(run_check("c06.special.closure_invariant_factor", grid_params(&cfg.grid, false, 0), tol::DUALITY, || {
        max_over(&duality_points(Family::PvR, &cfg.grid), closure_residual)
    }));
    out
}

// ---------------------------------------------------------------- 7

pub fn criterion7(cfg: &SuiteConfig) -> Vec<Report> {
    let qs = cfg.algebra_q.clone();
    let mut reps = Vec::new();
    for &q in &qs {
        for n in 1..=4u32 {
            let caps = vec![2, n, 1];
            for k in 1..=3 {
                reps.push((caps.clone(), k, q));
            }
        }
    }
    let pairs = capacity_vectors(2, 2, 3);
    let triples = capacity_vectors(3, 3, 2);
    vec![
        run_check("c07.algebra.relations", params!("q" => qs, "n_max" => 4), tol::ALGEBRA_RELATIONS, || {
            max_over(&reps, |(c, k, q)| {
                let r = rep_matrices(*k, c, *q)?;
                Ok(relation_residual(&r).max(star_residual(&r, c)))
            })
        }),
        run_check("c07.algebra.casimir_central", params!("q" => qs, "n_max" => 4), tol::ALGEBRA_RELATIONS, || {
            max_over(&reps, |(c, k, q)| Ok(casimir_residual(&rep_matrices(*k, c, *q)?)))
        }),
        run_check(
            "c07.algebra.generator_reconstruction",
            params!("q" => qs, "pairs" => pairs, "chains" => triples),
            tol::ALGEBRA_GENERATOR,
            || {
                let a = max_over(&pairs, |c| {
                    qs.iter().try_fold(0.0f64, |m, &q| Ok(m.max(casimir_generator_residual(1, c, q)?)))
                })?;
                let b = max_over(&triples, |c| {
                    qs.iter().try_fold(0.0f64, |m, &q| Ok(m.max(summed_generator_residual(c, q)?)))
                })?;
                Ok(a.max(b))
            },
        ),
        run_check(
            "c07.algebra.y_eigenvalue",
            params!("q" => qs, "rho" => cfg.grid.rho, "pairs" => pairs),
            tol::ALGEBRA_EIGEN,
            || {
                max_over(&pairs, |c| {
                    let mut w: f64 = 0.0;
                    for &q in &qs {
                        for &rho in &cfg.grid.rho {
                            for x1 in 0..=c[0] {
                                for x2 in 0..=c[1] {
                                    w = w.max(y_eigen_residual(c, q, rho, &[x1, x2])?);
                                }
                                w = w.max(y_site_eigen_residual(c[0], q, rho, x1)?);
                            }
                            let (a, b) = (rep_matrices(1, c, q)?, rep_matrices(2, c, q)?);
                            w = w.max(y_coproduct_residual(&a, &b, rho));
                        }
                    }
                    Ok(w)
                })
            },
        ),
        run_check(
            "c07.algebra.casimir_decomposition",
            params!("q" => qs, "rho" => cfg.grid.rho),
            tol::ALGEBRA_GENERATOR,
            || {
                let mut caps: Vec<Vec<u32>> = (1..=3).map(|n| vec![n]).collect();
                caps.extend(capacity_vectors(2, 2, 2));
                max_over(&caps, |c| {
                    let mut w: f64 = 0.0;
                    for &q in &qs {
                        for &rho in &cfg.grid.rho {
                            w = w.max(casimir_decomposition_residual(c, q, rho)?);
                        }
                    }
                    Ok(w)
                })
            },
        ),
    ]
}

// ---------------------------------------------------------------- 8

/// Probe scale of a limit case under `cfg`.
pub fn limit_scale(cfg: &SuiteConfig, c: LimitCase) -> f64 {
    if c.is_q_to_one() {
        cfg.q_to_one_scale
    } else if c == LimitCase::KRFromPvRVZero {
        cfg.v_zero_scale
    } else {
        cfg.limit_scale
    }
}

/// Limit checks for `cases`; `scale` overrides the configured probe scale.
pub fn limits_suite(cfg: &SuiteConfig, cases: &[LimitCase], scale: Option<f64>) -> Vec<Report> {
    cases
        .par_iter()
        .map(|&c| {
            let s = scale.unwrap_or_else(|| limit_scale(cfg, c));
            run_check(
                format!("c08.limit.{}", c.name()),
                params!("scale" => s, "q" => if c.is_q_to_one() { 1.0 - s } else { 0.5 }),
                c.tolerance(),
                || degeneration_residual(c, s),
            )
        })
        .collect()
}

pub fn criterion8(cfg: &SuiteConfig) -> Vec<Report> {
    let mut out = limits_suite(cfg, &LimitCase::ALL, None);
    // first-order convergence of the q -> 1 limits: a decade in 1 - q buys a
    // decade in the deviation
    out.push(run_check("c08.limit.q_to_one_order", params!("scales" => [1e-4, 1e-5]), 0.05, || {
        let cases: Vec<LimitCase> = LimitCase::ALL
            .iter()
            .copied()
            .filter(|c| c.is_q_to_one() && *c != LimitCase::AsepRToSsepRRates && *c != LimitCase::AsepLToSsepLRates)
            .collect();
        max_over(&cases, |&c| {
            let (a, b) = (degeneration_residual(c, 1e-4)?, degeneration_residual(c, 1e-5)?);
            Ok(((a / b).log10() - 1.0).abs())
        })
    }));
    out
}

// ---------------------------------------------------------------- 9

pub const CURRENT_CAPS: [u32; 3] = [1, 1, 1];
pub const CURRENT_XI: [u32; 3] = [1, 0, 1];
pub const CURRENT_Q: f64 = 0.6;
pub const CURRENT_RHO: f64 = 0.4;

pub fn criterion9(cfg: &SuiteConfig) -> Vec<Report> {
    let ts = [0.1, 0.5, 2.0];
    let base = params!("capacities" => CURRENT_CAPS, "xi" => CURRENT_XI, "q" => CURRENT_Q, "rho" => CURRENT_RHO);
    let mut exact = base.clone();
    exact.insert("k".into(), json!([1, 2, 3]));
    exact.insert("t".into(), json!(ts));
    let mut mc = base;
    mc.insert("k".into(), json!(2));
    mc.insert("t".into(), json!(0.5));
    mc.insert("runs".into(), json!(cfg.monte_carlo_runs));
    mc.insert("seed".into(), json!(cfg.seed));
    vec![
        run_check("c09.current.exact", exact, tol::CURRENT, || {
            let mut w: f64 = 0.0;
            for k in 1..=3 {
                for &t in &ts {
                    w = w.max(
                        current_theorem_check(&CURRENT_CAPS, CURRENT_Q, CURRENT_RHO, &CURRENT_XI, k, t)?.residual(),
                    );
                }
            }
            Ok(w)
        }),
        run_check("c09.current.monte_carlo_sigmas", mc, tol::SIGMAS, || {
            let ex = current_theorem_check(&CURRENT_CAPS, CURRENT_Q, CURRENT_RHO, &CURRENT_XI, 2, 0.5)?;
            let est = current_monte_carlo(
                &CURRENT_CAPS,
                CURRENT_Q,
                CURRENT_RHO,
                &CURRENT_XI,
                2,
                0.5,
                cfg.monte_carlo_runs,
                cfg.seed,
            )?;
            Ok((est.mean - ex.lhs).abs() / est.std_err.max(1e-15))
        }),
    ]
}

// ---------------------------------------------------------------- 10

pub fn criterion10(cfg: &SuiteConfig) -> Vec<Report> {
    let caps = vec![1u32, 1];
    let spec = ProcessSpec::new(ProcessKind::AsepR, 0.7, 0.5, caps.clone()).expect("valid spec");
    let sim = params!("process" => "asep_r", "capacities" => caps, "q" => 0.7, "rho" => 0.5, "seed" => cfg.seed);
    let mut chi = sim.clone();
    chi.insert("runs".into(), json!(cfg.chi_square_runs));
    chi.insert("t_mix".into(), json!(20.0));
    vec![
        // residual 1 - p, so pass means p >= 0.01
        run_check("c10.simulation.stationary_chi_square", chi, 1.0 - tol::CHI_P, || {
            let sector = enumerate(&spec.capacities, Some(1))?;
            let ends = sample_endpoints(&spec, &[1, 0], 20.0, cfg.chi_square_runs, cfg.seed)?;
            let counts = histogram(&sector, &ends)?;
            let mu = measure_vector(MeasureKind::WR, &spec, &sector)?;
            Ok(1.0 - chi_square(&counts, &mu)?.p_value)
        }),
        run_check("c10.simulation.holding_time_sigmas", sim.clone(), tol::SIGMAS, || {
            let xs = holding_times(&spec, &[1, 0], 10_000, cfg.seed)?;
            let exit: f64 = crate::processes::transitions(&spec, &[1, 0])?.iter().map(|m| m.1).sum();
            let est = McEstimate::from_samples(&xs);
            Ok((est.mean - 1.0 / exit).abs() / est.std_err)
        }),
        run_check("c10.simulation.rerun_identical", sim, 0.0, || {
            let big = ProcessSpec::new(ProcessKind::AsepR, 0.8, 1.0, vec![2, 2, 2, 2])?;
            let init = Configuration::new(vec![1, 1, 1, 1], vec![2, 2, 2, 2])?;
            let a = gillespie_run(&big, &init, 10.0, cfg.seed)?.to_csv_string()?;
            let b = gillespie_run(&big, &init, 10.0, cfg.seed)?.to_csv_string()?;
            Ok(if a == b { 0.0 } else { 1.0 })
        }),
    ]
}

/// Runs criteria `1..=10` in order.
pub fn criterion(n: usize, cfg: &SuiteConfig) -> Result<Vec<Report>> {
    Ok(match n {
        1 => criterion1(cfg),
        2 => criterion2(cfg),
        3 => criterion3(cfg),
        4 => criterion4(cfg),
        5 => criterion5(cfg),
        6 => criterion6(cfg),
        7 => criterion7(cfg),
        8 => criterion8(cfg),
        9 => criterion9(cfg),
        10 => criterion10(cfg),
        _ => return Err(Error::IndexOutOfRange { index: n, max: 10 }),
    })
}

/// Every acceptance check once, sorted by check id.
pub fn run_all(cfg: &SuiteConfig) -> Vec<Report> {
    let mut all: Vec<Report> = (1..=10).flat_map(|n| criterion(n, cfg).expect("valid criterion")).collect();
    all.sort_by(|a, b| a.check.cmp(&b.check));
    all
}

/// `D_tazrp` on one sector pair; exposed for single-point CLI checks.
pub fn tazrp_value(zeta: &[u32], xi: &[u32], q: f64) -> f64 {
    d_tazrp(zeta, xi, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_enumeration() {
        assert_eq!(capacity_vectors(1, 3, 2).len(), 14);
        assert_eq!(capacity_vectors(1, 4, 3).len(), 120);
        assert_eq!(capacity_vectors(2, 2, 2), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn report_passes_iff_within_tolerance() {
        let r = run_check("x", params!("a" => 1), 1e-3, || Ok(5e-4));
        assert!(r.pass);
        let r = run_check("x", BTreeMap::new(), 1e-3, || Ok(2e-3));
        assert!(!r.pass);
        let r = run_check("x", BTreeMap::new(), 1e-3, || Err(Error::PoleHit("p".into())));
        assert!(!r.pass && r.numerical_error && r.error.is_some());
        let s = serde_json::to_string(&r.without_timing()).unwrap();
        assert!(s.starts_with(
            "{\"check\":\"x\",\"params\":{},\"residual\":null,\"tol\":0.001,\"pass\":false,\"seconds\":0.0"
        ));
    }

    #[test]
    fn config_overrides() {
        let c = SuiteConfig::from_toml("seed = 5\n[grid]\nq = [0.7]\n").unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.grid.q, vec![0.7]);
        assert_eq!(c.grid.v, Grid::default().v);
        assert!(SuiteConfig::from_toml("nonsense = 1").is_err());
    }

    #[test]
    fn special_identities() {
        assert!(bracket_identity_residual(0.37, 0.6) < 1e-13);
        assert_eq!(product_identity_residual(100, 1), 0.0);
        assert!(reflection_residual(3, 0.4, 0.7).unwrap() < 1e-12);
        assert!(racah_sum_residual(0.2, -0.4, 1.3, 2, 0.6).unwrap() < 1e-12);
    }
}
