//! Jump rates and sparse generators for the exclusion and zero-range
//! processes, their reversible measures and a detailed-balance check.

use crate::error::{Error, Result};
use crate::lattice::{enumerate, head_sum, tail_sum, u_sum, Configuration, StateSector};
use crate::qspecial::{big_w_site, binomial, q_bracket, w_hat_one, w_inv_one, w_site, Scalar};
use nalgebra::DMatrix;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Process families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessKind {
    /// Generalized ASEP with site capacities.
    Asep,
    /// Dynamic ASEP driven by the right height function `h^+`.
    AsepR,
    /// Dynamic ASEP driven by the left height function `h^-`.
    AsepL,
    /// Symmetric exclusion.
    Ssep,
    /// Dynamic symmetric exclusion, right version.
    SsepR,
    /// Dynamic symmetric exclusion, left version.
    SsepL,
    /// q-TAZRP with jumps to the right.
    TazrpRight,
    /// q-TAZRP with jumps to the left.
    TazrpLeft,
}

impl ProcessKind {
    pub const ALL: [ProcessKind; 8] = [
        ProcessKind::Asep,
        ProcessKind::AsepR,
        ProcessKind::AsepL,
        ProcessKind::Ssep,
        ProcessKind::SsepR,
        ProcessKind::SsepL,
        ProcessKind::TazrpRight,
        ProcessKind::TazrpLeft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Asep => "asep",
            ProcessKind::AsepR => "asep_r",
            ProcessKind::AsepL => "asep_l",
            ProcessKind::Ssep => "ssep",
            ProcessKind::SsepR => "ssep_r",
            ProcessKind::SsepL => "ssep_l",
            ProcessKind::TazrpRight => "tazrp_right",
            ProcessKind::TazrpLeft => "tazrp_left",
        }
    }

    /// Kinds whose rates depend on a boundary value.
    pub fn is_dynamic(self) -> bool {
        matches!(self, ProcessKind::AsepR | ProcessKind::AsepL | ProcessKind::SsepR | ProcessKind::SsepL)
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, ProcessKind::Ssep | ProcessKind::SsepR | ProcessKind::SsepL)
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "asep" => ProcessKind::Asep,
            "asep_r" | "rasep" => ProcessKind::AsepR,
            "asep_l" | "lasep" => ProcessKind::AsepL,
            "ssep" | "sep" => ProcessKind::Ssep,
            "ssep_r" | "rssep" | "rsep" => ProcessKind::SsepR,
            "ssep_l" | "lssep" | "lsep" => ProcessKind::SsepL,
            "tazrp_right" | "tazrp_r" => ProcessKind::TazrpRight,
            "tazrp_left" | "tazrp_l" => ProcessKind::TazrpLeft,
            _ => return Err(Error::InvalidArgument(format!("unknown process '{s}'"))),
        };
        Ok(k)
    }
}

/// Process kind with its parameters. `boundary` is `rho` for right-dynamic
/// kinds and `lambda` for left-dynamic kinds, ignored otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub q: f64,
    pub boundary: f64,
    pub capacities: Vec<u32>,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, q: f64, boundary: f64, capacities: Vec<u32>) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidArgument(format!("q must be positive, got {q}")));
        }
        if capacities.is_empty() || capacities.contains(&0) {
            return Err(Error::InvalidArgument("capacities must be nonempty and positive".into()));
        }
        if !boundary.is_finite() {
            return Err(Error::InvalidArgument("boundary value must be finite".into()));
        }
        Ok(ProcessSpec { kind, q, boundary, capacities })
    }

    pub fn sites(&self) -> usize {
        self.capacities.len()
    }
}

/// Jump direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

/// ASEP rate for a jump `k -> k+1` (0-based `k`).
fn c_plus(e: &[u32], n: &[u32], q: f64, k: usize) -> f64 {
    let ex = -(e[k + 1] as f64 + n[k] as f64 - e[k] as f64 + 1.0);
    q.powf(ex) * q_bracket(e[k] as f64, q) * q_bracket((n[k + 1] - e[k + 1]) as f64, q)
}

/// ASEP rate for a jump `k -> k-1` (0-based `k`).
fn c_minus(e: &[u32], n: &[u32], q: f64, k: usize) -> f64 {
    let ex = e[k - 1] as f64 + n[k] as f64 - e[k] as f64 + 1.0;
    q.powf(ex) * q_bracket(e[k] as f64, q) * q_bracket((n[k - 1] - e[k - 1]) as f64, q)
}

fn pole(what: &str) -> Error {
    Error::PoleHit(what.to_string())
}

/// Right-dynamic ASEP rate with `c = sign * q^{2 rho}`; `sign = -1` is the
/// imaginary shift of `rho` that leads to the symmetric dynamic process.
pub(crate) fn asep_r_rate_signed(
    e: &[u32],
    n: &[u32],
    q: f64,
    rho: f64,
    sign: f64,
    k: usize,
    dir: Direction,
) -> Result<f64> {
    let c = sign * q.powf(2.0 * rho);
    // q^{-2 h^+_j} for 1-based j
    let eh = |j: usize| q.powf(-2.0 * tail_sum(e, n, j) as f64) / c;
    let qp = |x: u32, s: f64| q.powf(s * 2.0 * x as f64);
    match dir {
        Direction::Right => {
            let (a, b) = (eh(k + 1), eh(k + 2));
            let den = (1.0 + b) * (1.0 + q.powi(-2) * b);
            if den == 0.0 {
                return Err(pole("asep_r rate"));
            }
            Ok(c_plus(e, n, q, k) * (1.0 + qp(e[k], 1.0) * a) * (1.0 + qp(e[k + 1], 1.0) * b) / den)
        }
        Direction::Left => {
            let (a, b) = (eh(k + 1), eh(k + 2));
            let den = (1.0 + a) * (1.0 + q * q * a);
            if den == 0.0 {
                return Err(pole("asep_r rate"));
            }
            Ok(c_minus(e, n, q, k) * (1.0 + qp(e[k - 1], -1.0) * a) * (1.0 + qp(e[k], -1.0) * b) / den)
        }
    }
}

/// Left-dynamic ASEP rate with `d = sign * q^{2 lambda}`.
pub(crate) fn asep_l_rate_signed(
    e: &[u32],
    n: &[u32],
    q: f64,
    lam: f64,
    sign: f64,
    k: usize,
    dir: Direction,
) -> Result<f64> {
    let d = sign * q.powf(2.0 * lam);
    // q^{2 h^-_j} for 1-based j
    let gh = |j: usize| d * q.powf(2.0 * head_sum(e, n, j) as f64);
    let qp = |x: u32, s: f64| q.powf(s * 2.0 * x as f64);
    match dir {
        Direction::Right => {
            let (a, b) = (gh(k), gh(k + 1));
            let den = (1.0 + b) * (1.0 + q.powi(-2) * b);
            if den == 0.0 {
                return Err(pole("asep_l rate"));
            }
            Ok(c_plus(e, n, q, k) * (1.0 + qp(e[k], 1.0) * a) * (1.0 + qp(e[k + 1], 1.0) * b) / den)
        }
        Direction::Left => {
            let (a, b) = (gh(k), gh(k + 1));
            let den = (1.0 + a) * (1.0 + q * q * a);
            if den == 0.0 {
                return Err(pole("asep_l rate"));
            }
            Ok(c_minus(e, n, q, k) * (1.0 + qp(e[k - 1], -1.0) * a) * (1.0 + qp(e[k], -1.0) * b) / den)
        }
    }
}

fn nonneg(rate: f64, site: usize) -> Result<f64> {
    if rate < 0.0 {
        Err(Error::NegativeRate { rate, site })
    } else {
        Ok(rate)
    }
}

/// Rate of the jump leaving 0-based site `k` in direction `dir`; zero when
/// the move is illegal.
pub(crate) fn raw_rate(spec: &ProcessSpec, e: &[u32], k: usize, dir: Direction) -> Result<f64> {
    let n = &spec.capacities[..];
    let m = n.len();
    let to = match dir {
        Direction::Right if k + 1 < m => k + 1,
        Direction::Left if k >= 1 && k < m => k - 1,
        _ => return Ok(0.0),
    };
    if e[k] == 0 || e[to] >= n[to] {
        return Ok(0.0);
    }
    let q = spec.q;
    let (ef, nf) = (|j: usize| e[j] as f64, |j: usize| n[j] as f64);
    match spec.kind {
        ProcessKind::Asep => Ok(match dir {
            Direction::Right => c_plus(e, n, q, k),
            Direction::Left => c_minus(e, n, q, k),
        }),
        ProcessKind::AsepR => asep_r_rate_signed(e, n, q, spec.boundary, 1.0, k, dir),
        ProcessKind::AsepL => asep_l_rate_signed(e, n, q, spec.boundary, 1.0, k, dir),
        ProcessKind::Ssep => Ok(ef(k) * (nf(to) - ef(to))),
        ProcessKind::SsepR => {
            let h = |j: usize| spec.boundary + tail_sum(e, n, j) as f64; // 1-based j
            let (num, den) = match dir {
                Direction::Right => {
                    let (hk, hk1) = (h(k + 1), h(k + 2));
                    ((hk - ef(k)) * (hk1 - ef(k + 1)), hk1 * (hk1 + 1.0))
                }
                Direction::Left => {
                    let (hk, hk1) = (h(k + 1), h(k + 2));
                    ((hk + ef(k - 1)) * (hk1 + ef(k)), hk * (hk - 1.0))
                }
            };
            if den == 0.0 {
                return Err(pole("ssep_r rate"));
            }
            nonneg(ef(k) * (nf(to) - ef(to)) * num / den, k + 1)
        }
        ProcessKind::SsepL => {
            let h = |j: usize| spec.boundary + head_sum(e, n, j) as f64; // 1-based j
            let (num, den) = match dir {
                Direction::Right => {
                    let (a, b) = (h(k), h(k + 1));
                    ((a + ef(k)) * (b + ef(k + 1)), b * (b - 1.0))
                }
                Direction::Left => {
                    let (a, b) = (h(k), h(k + 1));
                    ((a - ef(k - 1)) * (b - ef(k)), a * (a + 1.0))
                }
            };
            if den == 0.0 {
                return Err(pole("ssep_l rate"));
            }
            nonneg(ef(k) * (nf(to) - ef(to)) * num / den, k + 1)
        }
        ProcessKind::TazrpRight | ProcessKind::TazrpLeft => {
            let allowed = matches!(
                (spec.kind, dir),
                (ProcessKind::TazrpRight, Direction::Right) | (ProcessKind::TazrpLeft, Direction::Left)
            );
            if !allowed {
                return Ok(0.0);
            }
            if (q - 1.0).abs() < crate::qspecial::Q_ONE_EPS {
                Ok(ef(k))
            } else {
                Ok((1.0 - q.powi(2 * e[k] as i32)) / (1.0 - q * q))
            }
        }
    }
}

/// Rate of the jump leaving 1-based site `k`; zero for illegal moves.
pub fn jump_rate(spec: &ProcessSpec, config: &Configuration, k: usize, dir: Direction) -> Result<f64> {
    if config.capacities() != spec.capacities.as_slice() {
        return Err(Error::InvalidArgument("configuration capacities differ from the process".into()));
    }
    if k == 0 || k > spec.sites() {
        return Err(Error::IndexOutOfRange { index: k, max: spec.sites() });
    }
    raw_rate(spec, config.occupations(), k - 1, dir)
}

/// Outgoing transitions `(target, rate)` with positive rate, in a fixed order.
pub fn transitions(spec: &ProcessSpec, e: &[u32]) -> Result<Vec<(Vec<u32>, f64)>> {
    let m = spec.sites();
    let mut out = Vec::new();
    for k in 0..m {
        for (dir, to) in [(Direction::Right, k + 1), (Direction::Left, k.wrapping_sub(1))] {
            let r = raw_rate(spec, e, k, dir)?;
            if r > 0.0 {
                let mut t = e.to_vec();
                t[k] -= 1;
                t[to] += 1;
                out.push((t, r));
            }
        }
    }
    Ok(out)
}

/// Conservative generator on a state sector: sparse off-diagonal rates in
/// row-major order and the diagonal closing each row to zero.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    sector: Arc<StateSector>,
    entries: Vec<(usize, usize, f64)>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn sector(&self) -> &StateSector {
        &self.sector
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Off-diagonal `(from, to, rate)` triples sorted by `(from, to)`.
    pub fn off_diagonal(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, r) in &self.entries {
            m[(i, j)] += r;
        }
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        m
    }

    /// `(L f)(i) = sum_j L(i, j) f(j)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(f).map(|(d, x)| d * x).collect();
        for &(i, j, r) in &self.entries {
            out[i] += r * f[j];
        }
        out
    }

    /// Largest total exit rate.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }
}

/// Builds the generator of `spec` on `sector`.
pub fn build_generator(spec: &ProcessSpec, sector: &StateSector) -> Result<GeneratorMatrix> {
    build_generator_shared(spec, Arc::new(sector.clone()))
}

/// Like [`build_generator`] but shares an existing sector.
pub fn build_generator_shared(spec: &ProcessSpec, sector: Arc<StateSector>) -> Result<GeneratorMatrix> {
    if sector.capacities() != spec.capacities.as_slice() {
        return Err(Error::InvalidArgument("sector capacities differ from the process".into()));
    }
    let mut entries = Vec::new();
    let mut diag = vec![0.0; sector.len()];
    for (i, s) in sector.states().iter().enumerate() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (t, r) in transitions(spec, s)? {
            let j = sector
                .index_of(&t)
                .ok_or_else(|| Error::InvalidArgument("sector is not closed under the dynamics".into()))?;
            row.push((j, r));
        }
        row.sort_by_key(|&(j, _)| j);
        for (j, r) in row {
            diag[i] -= r;
            match entries.last_mut() {
                Some((a, b, x)) if *a == i && *b == j => *x += r,
                _ => entries.push((i, j, r)),
            }
        }
    }
    Ok(GeneratorMatrix { sector, entries, diag })
}

/// Reversible-measure kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// ASEP measure `w`, including the `q^{u}` prefactor.
    W,
    /// Right-dynamic measure `W_R`.
    WR,
    /// Left-dynamic measure `W_L`.
    WL,
    /// `q <-> 1/q` invariant variant of `W_R`.
    WRInv,
    /// Symmetric right-dynamic measure.
    WHatR,
    /// Symmetric left-dynamic measure.
    WHatL,
    /// Product of binomials, reversible for symmetric exclusion.
    WHat,
}

/// `w(eta; N; q) = q^{u(eta)} prod_k w(eta_k; N_k; q)`.
pub fn w_multi(e: &[u32], n: &[u32], q: f64) -> f64 {
    let p: f64 = e.iter().zip(n).map(|(&x, &c)| w_site(x, c, q)).product();
    q.powf(u_sum(e, n) as f64) * p
}

/// `W_R` with `qr = q^rho`.
pub fn w_r_generic<T: Scalar>(e: &[u32], n: &[u32], qr: T, q: f64) -> Result<T> {
    let mut r = T::one();
    for k in 0..e.len() {
        let qh = qr * T::real(q.powf(tail_sum(e, n, k + 2) as f64));
        r *= big_w_site(e[k], n[k], qh, q)?;
    }
    Ok(r)
}

/// `W_L` with `ql = q^lambda`; the site weights use base `1/q`.
pub fn w_l_generic<T: Scalar>(e: &[u32], n: &[u32], ql: T, q: f64) -> Result<T> {
    let mut r = T::one();
    for k in 0..e.len() {
        let qh = T::one() / ql * T::real(q.powf(-(head_sum(e, n, k) as f64)));
        r *= big_w_site(e[k], n[k], qh, 1.0 / q)?;
    }
    Ok(r)
}

fn measure_raw(kind: MeasureKind, e: &[u32], n: &[u32], q: f64, b: f64) -> Result<f64> {
    match kind {
        MeasureKind::W => Ok(w_multi(e, n, q)),
        MeasureKind::WR => w_r_generic(e, n, q.powf(b), q),
        MeasureKind::WL => w_l_generic(e, n, q.powf(b), q),
        MeasureKind::WRInv => {
            (0..e.len()).try_fold(1.0, |r, k| Ok(r * w_inv_one(e[k], n[k], b + tail_sum(e, n, k + 2) as f64, q)?))
        }
        MeasureKind::WHatR => {
            (0..e.len()).try_fold(1.0, |r, k| Ok(r * w_hat_one(e[k], n[k], b + tail_sum(e, n, k + 2) as f64)?))
        }
        MeasureKind::WHatL => {
            (0..e.len()).try_fold(1.0, |r, k| Ok(r * w_hat_one(e[k], n[k], b + head_sum(e, n, k) as f64)?))
        }
        MeasureKind::WHat => Ok(e.iter().zip(n).map(|(&x, &c)| binomial(c, x)).product()),
    }
}

/// Reversible measure of the given kind at one configuration; `spec`
/// supplies `q` and the boundary value.
pub fn stationary_measure(kind: MeasureKind, spec: &ProcessSpec, config: &Configuration) -> Result<f64> {
    if config.capacities() != spec.capacities.as_slice() {
        return Err(Error::InvalidArgument("configuration capacities differ from the process".into()));
    }
    measure_raw(kind, config.occupations(), &spec.capacities, spec.q, spec.boundary)
}

/// Measure values on every state of a sector.
pub fn measure_vector(kind: MeasureKind, spec: &ProcessSpec, sector: &StateSector) -> Result<Vec<f64>> {
    sector.states().iter().map(|s| measure_raw(kind, s, &spec.capacities, spec.q, spec.boundary)).collect()
}

/// `max |mu(s) L(s,s') - mu(s') L(s',s)|` over pairs, divided by the largest
/// flux `mu(s) L(s,s')`.
pub fn detailed_balance_residual(gen: &GeneratorMatrix, mu: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let lookup = |i: usize, j: usize| -> f64 {
        gen.entries.binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j))).map(|p| gen.entries[p].2).unwrap_or(0.0)
    };
    for &(i, j, r) in &gen.entries {
        let f = mu[i] * r;
        scale = scale.max(f.abs());
        worst = worst.max((f - mu[j] * lookup(j, i)).abs());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Probabilities that the stationary height chain steps up or down from `h`.
pub fn height_chain_step(h: f64, q: f64) -> (f64, f64) {
    let a = q.powf(-2.0 * h);
    if a.is_infinite() {
        return (1.0, 0.0);
    }
    (a / (1.0 + a), 1.0 / (1.0 + a))
}

/// Full state space or fixed-total sector, as appropriate for the kind;
/// zero-range kinds always need a total.
pub fn default_sector(spec: &ProcessSpec, total: Option<u32>) -> Result<StateSector> {
    match (spec.kind, total) {
        (ProcessKind::TazrpLeft | ProcessKind::TazrpRight, None) => {
            Err(Error::InvalidArgument("zero-range processes live on fixed-total sectors".into()))
        }
        _ => enumerate(&spec.capacities, total),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(kind: ProcessKind, q: f64, b: f64, caps: &[u32]) -> ProcessSpec {
        ProcessSpec::new(kind, q, b, caps.to_vec()).unwrap()
    }

    #[test]
    fn rate_examples() {
        let q = 0.6;
        let s = spec(ProcessKind::Asep, q, 0.0, &[1, 1]);
        let e = Configuration::new(vec![0, 1], vec![1, 1]).unwrap();
        assert_eq!(jump_rate(&s, &e, 1, Direction::Right).unwrap(), 0.0);
        let e = Configuration::new(vec![1, 0], vec![1, 1]).unwrap();
        assert!((jump_rate(&s, &e, 1, Direction::Right).unwrap() - 1.0 / q).abs() < 1e-14);
        let rho = 0.4;
        let r = spec(ProcessKind::AsepR, q, rho, &[1, 1, 1]);
        let e = Configuration::new(vec![1, 0, 1], vec![1, 1, 1]).unwrap();
        let h2 = rho + 1.0 - 1.0; // h^+_2 = rho + (2*0-1) + (2*1-1)
        let expect = (1.0 / q) * (1.0 + q.powf(-2.0 * h2)) / (1.0 + q.powf(-2.0 * h2 - 2.0));
        assert!((jump_rate(&r, &e, 1, Direction::Right).unwrap() - expect).abs() < 1e-13);
        let t = spec(ProcessKind::TazrpRight, 0.3, 0.0, &[2, 2]);
        let e = Configuration::new(vec![1, 0], vec![2, 2]).unwrap();
        assert!((jump_rate(&t, &e, 1, Direction::Right).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn generator_examples() {
        let s = spec(ProcessKind::Asep, 0.5, 0.0, &[1, 1]);
        let g = build_generator(&s, &enumerate(&[1, 1], None).unwrap()).unwrap();
        assert_eq!(g.dim(), 4);
        let d = g.to_dense();
        for i in 0..4 {
            assert!(d.row(i).sum().abs() < 1e-14);
        }
        let g0 = build_generator(&s, &enumerate(&[1, 1], Some(0)).unwrap()).unwrap();
        assert!(g0.to_dense().iter().all(|&x| x == 0.0));
        let g1 = build_generator(&s, &enumerate(&[1, 1], Some(1)).unwrap()).unwrap().to_dense();
        // states (0,1), (1,0)
        assert!((g1[(1, 0)] - 2.0).abs() < 1e-14);
        assert!((g1[(0, 1)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn detailed_balance_examples() {
        let s = spec(ProcessKind::Asep, 0.7, 0.0, &[2, 1]);
        let sec = enumerate(&[2, 1], None).unwrap();
        let g = build_generator(&s, &sec).unwrap();
        let mu = measure_vector(MeasureKind::W, &s, &sec).unwrap();
        assert!(detailed_balance_residual(&g, &mu) < 1e-12);
        let s = spec(ProcessKind::AsepR, 0.6, 0.4, &[1, 2, 1]);
        let sec = enumerate(&[1, 2, 1], None).unwrap();
        let g = build_generator(&s, &sec).unwrap();
        let mu = measure_vector(MeasureKind::WR, &s, &sec).unwrap();
        assert!(detailed_balance_residual(&g, &mu) < 1e-12);
        let zero = build_generator(&s, &enumerate(&[1, 2, 1], Some(0)).unwrap()).unwrap();
        assert_eq!(detailed_balance_residual(&zero, &[1.0]), 0.0);
    }

    #[test]
    fn measure_examples() {
        let caps = vec![1, 2];
        let s = spec(ProcessKind::AsepR, 0.6, 0.3, &caps);
        let zero = Configuration::empty(caps.clone()).unwrap();
        assert_eq!(stationary_measure(MeasureKind::W, &s, &zero).unwrap(), 1.0);
        let total: f64 = measure_vector(MeasureKind::WR, &s, &enumerate(&caps, None).unwrap()).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        // W_L is W_R of the reversed configuration at 1/q
        let z = [1u32, 0];
        let wl = w_l_generic(&z, &caps, 0.6f64.powf(0.3), 0.6).unwrap();
        let wr = w_r_generic(&[0, 1], &[2, 1], (1.0 / 0.6f64).powf(0.3), 1.0 / 0.6).unwrap();
        assert!((wl - wr).abs() < 1e-13 * wl.abs());
    }

    #[test]
    fn height_chain_examples() {
        assert_eq!(height_chain_step(0.0, 0.3), (0.5, 0.5));
        let (u, d) = height_chain_step(1.0, 0.5);
        assert!((u - 0.8).abs() < 1e-15 && (d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ssep_guard() {
        let s = spec(ProcessKind::SsepR, 1.0, 0.5, &[2, 2]);
        let e = Configuration::new(vec![2, 0], vec![2, 2]).unwrap();
        let r = jump_rate(&s, &e, 1, Direction::Right);
        assert!(matches!(r, Err(Error::NegativeRate { .. }) | Ok(_)));
        let bad = (0..=2).flat_map(|a| (0..=2).map(move |b| vec![a, b])).any(|o| {
            let c = Configuration::new(o, vec![2, 2]).unwrap();
            matches!(jump_rate(&s, &c, 1, Direction::Right), Err(Error::NegativeRate { .. }))
                || matches!(jump_rate(&s, &c, 2, Direction::Left), Err(Error::NegativeRate { .. }))
        });
        assert!(bad, "a boundary inside the guard should produce a negative rate");
    }

    fn occ_strategy() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        prop::collection::vec(1u32..4, 2..5).prop_flat_map(|caps| {
            let occ: Vec<_> = caps.iter().map(|&c| 0..=c).collect();
            (occ, Just(caps))
        })
    }

    proptest! {
        #[test]
        fn dynamic_rates_invariant_under_q_inverse((occ, caps) in occ_strategy(), q in 0.3f64..0.95, b in -2.0f64..2.0) {
            for kind in [ProcessKind::AsepR, ProcessKind::AsepL] {
                let s1 = spec(kind, q, b, &caps);
                let s2 = spec(kind, 1.0 / q, b, &caps);
                for k in 0..caps.len() {
                    for dir in [Direction::Right, Direction::Left] {
                        let a = raw_rate(&s1, &occ, k, dir).unwrap();
                        let c = raw_rate(&s2, &occ, k, dir).unwrap();
                        prop_assert!((a - c).abs() <= 1e-10 * a.abs().max(1.0));
                    }
                }
            }
        }

        #[test]
        fn left_rates_are_reversed_right_rates((occ, caps) in occ_strategy(), q in 0.3f64..1.5, lam in -2.0f64..2.0) {
            let m = caps.len();
            let l = spec(ProcessKind::AsepL, q, lam, &caps);
            let mut rc = caps.clone(); rc.reverse();
            let mut ro = occ.clone(); ro.reverse();
            let r = spec(ProcessKind::AsepR, q, lam, &rc);
            for k in 0..m {
                let a = raw_rate(&l, &occ, k, Direction::Right).unwrap();
                let b = raw_rate(&r, &ro, m - 1 - k, Direction::Left).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
                let a = raw_rate(&l, &occ, k, Direction::Left).unwrap();
                let b = raw_rate(&r, &ro, m - 1 - k, Direction::Right).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }

        #[test]
        fn particle_hole_symmetry((occ, caps) in occ_strategy(), q in 0.3f64..1.5) {
            let s1 = spec(ProcessKind::Asep, q, 0.0, &caps);
            let s2 = spec(ProcessKind::Asep, 1.0 / q, 0.0, &caps);
            let hole: Vec<u32> = occ.iter().zip(&caps).map(|(o, c)| c - o).collect();
            // a particle jump right in eta is a hole jump left in N - eta
            for k in 0..caps.len() - 1 {
                let a = raw_rate(&s1, &occ, k, Direction::Right).unwrap();
                let b = raw_rate(&s2, &hole, k + 1, Direction::Left).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }

        #[test]
        fn rates_monotone_in_height(q in 0.3f64..0.9, rho0 in -3.0f64..3.0) {
            // single site pair with other occupations fixed; sweep the boundary
            let caps = [2u32, 2, 1];
            let occ = [1u32, 1, 0];
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..20 {
                let rho = rho0 + 0.25 * i as f64;
                let s = spec(ProcessKind::AsepR, q, rho, &caps);
                let plus = raw_rate(&s, &occ, 1, Direction::Right).unwrap();
                let minus = raw_rate(&s, &occ, 1, Direction::Left).unwrap();
                if let Some((p0, m0)) = prev {
                    prop_assert!(plus <= p0 * (1.0 + 1e-12));
                    prop_assert!(minus >= m0 * (1.0 - 1e-12));
                }
                prev = Some((plus, minus));
            }
        }
    }

    #[test]
    fn rates_cross_at_balanced_height() {
        // one particle of capacity N on site k, neighbours empty with the same N
        let (q, nn) = (0.6, 2u32);
        let caps = [nn, nn, nn];
        let occ = [0u32, 1, 0];
        let diff = |rho: f64| {
            let s = spec(ProcessKind::AsepR, q, rho, &caps);
            raw_rate(&s, &occ, 1, Direction::Right).unwrap() - raw_rate(&s, &occ, 1, Direction::Left).unwrap()
        };
        let (mut a, mut b) = (-10.0, 10.0);
        assert!(diff(a).signum() != diff(b).signum());
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if diff(c).signum() == diff(a).signum() {
                a = c;
            } else {
                b = c;
            }
        }
        let rho = 0.5 * (a + b);
        let hk = rho + tail_sum(&occ, &caps, 2) as f64;
        assert!((hk - (1.0 - nn as f64 / 2.0)).abs() < 1e-9, "h = {hk}");
    }
}
