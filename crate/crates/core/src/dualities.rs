//! Duality functions as nested products of one-site functions, the
//! generator-level duality residual, Gram-matrix orthogonality checks and a
//! harness probing every degeneration at a finite scale.

use crate::error::{Error, Result};
use crate::lattice::{enumerate, head_sum, tail_sum, u_sum, Configuration, StateSector};
use crate::processes::{
    asep_l_rate_signed, asep_r_rate_signed, build_generator, raw_rate, w_l_generic, w_multi, w_r_generic, Direction,
    ProcessKind, ProcessSpec,
};
use crate::qspecial::{
    binomial, k_aff_site, k_hat_site, k_qtm_site, k_site, omega, p_hat_site, p_prime_site, p_site, q_poch, r_hat_site,
    r_site, sign_pow, w_hat_one, OmegaKind, Scalar,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

/// Duality function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    KR,
    KL,
    KLv,
    RvProduct,
    RvSum,
    PvR,
    PPrimeR,
    KQtm,
    KAff,
    DTri,
    DTriPrime,
    DTazrp,
    RHat,
    PHatR,
    KHat,
}

impl Family {
    pub const ALL: [Family; 15] = [
        Family::KR,
        Family::KL,
        Family::KLv,
        Family::RvProduct,
        Family::RvSum,
        Family::PvR,
        Family::PPrimeR,
        Family::KQtm,
        Family::KAff,
        Family::DTri,
        Family::DTriPrime,
        Family::DTazrp,
        Family::RHat,
        Family::PHatR,
        Family::KHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::KR => "K_R",
            Family::KL => "K_L",
            Family::KLv => "K_L_v",
            Family::RvProduct => "R_v",
            Family::RvSum => "R_v_sum",
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

    /// Whether the family carries the free parameter `v`.
    pub fn uses_v(self) -> bool {
        matches!(
            self,
            Family::KLv
                | Family::RvProduct
                | Family::RvSum
                | Family::PvR
                | Family::PPrimeR
                | Family::KQtm
                | Family::KAff
                | Family::RHat
                | Family::PHatR
                | Family::KHat
        )
    }

    /// Kinds of the processes acting on the first and second argument.
    pub fn process_kinds(self) -> (ProcessKind, ProcessKind) {
        use ProcessKind::*;
        match self {
            Family::KR | Family::PvR | Family::PPrimeR => (Asep, AsepR),
            Family::KL | Family::KLv => (Asep, AsepL),
            Family::RvProduct | Family::RvSum => (AsepL, AsepR),
            Family::KQtm | Family::KAff | Family::DTri | Family::DTriPrime => (Asep, Asep),
            Family::DTazrp => (TazrpLeft, TazrpRight),
            Family::RHat => (SsepL, SsepR),
            Family::PHatR => (Ssep, SsepR),
            Family::KHat => (Ssep, Ssep),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '\''], "_");
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "kr" => Some(Family::KR),
                "kl" => Some(Family::KL),
                "r_v_product" | "rv" => Some(Family::RvProduct),
                "p_r" | "pv" => Some(Family::PvR),
                "p_prime" | "p__r" => Some(Family::PPrimeR),
                "d" | "d_triangular" => Some(Family::DTri),
                "d_prime" => Some(Family::DTriPrime),
                "tazrp" => Some(Family::DTazrp),
                "p_hat" => Some(Family::PHatR),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown duality family '{s}'")))
    }
}

/// Parameters shared by all families; each family reads what it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityParams {
    pub q: f64,
    pub rho: f64,
    pub lambda: f64,
    pub v: f64,
    pub capacities: Vec<u32>,
}

/// A duality function bound to its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityEvaluator {
    family: Family,
    params: DualityParams,
}

fn qi(q: f64, e: i64) -> f64 {
    q.powi(e as i32)
}

/// `K_R(eta, xi)` with `qr = q^rho`.
pub fn k_r_product<T: Scalar>(eta: &[u32], xi: &[u32], caps: &[u32], qr: T, q: f64) -> Result<T> {
    let mut acc = T::real(q.powf(-0.5 * u_sum(eta, caps) as f64));
    for k in 0..caps.len() {
        let qh = qr * T::real(qi(q, tail_sum(xi, caps, k + 2)));
        acc *= k_site(eta[k], xi[k], qh, caps[k], q)?;
    }
    Ok(acc)
}

/// `K_L(eta, zeta)` with `ql = q^lambda`; one-site factors in base `1/q`.
pub fn k_l_product<T: Scalar>(eta: &[u32], zeta: &[u32], caps: &[u32], ql: T, q: f64) -> Result<T> {
    let mut acc = T::real(q.powf(-0.5 * u_sum(eta, caps) as f64));
    for k in 0..caps.len() {
        let qh = T::one() / (ql * T::real(qi(q, head_sum(zeta, caps, k))));
        acc *= k_site(eta[k], zeta[k], qh, caps[k], 1.0 / q)?;
    }
    Ok(acc)
}

/// Nested q-Racah product `R^v(zeta, xi)`.
pub fn r_product<T: Scalar>(zeta: &[u32], xi: &[u32], caps: &[u32], ql: T, qr: T, v: T, q: f64) -> Result<T> {
    let mut acc = T::one();
    for k in 0..caps.len() {
        let a = ql * T::real(qi(q, head_sum(zeta, caps, k)));
        let b = qr * T::real(qi(q, tail_sum(xi, caps, k + 2)));
        acc *= r_site(zeta[k], xi[k], a, b, v, caps[k], q)?;
    }
    Ok(acc)
}

type SiteFn<T> = fn(u32, u32, T, T, T, u32, f64) -> Result<T>;

/// Products whose left heights are those of `eta` at boundary 0.
fn hahn_type_product<T: Scalar>(f: SiteFn<T>, eta: &[u32], xi: &[u32], caps: &[u32], qr: T, v: T, q: f64) -> Result<T> {
    let mut acc = T::one();
    for k in 0..caps.len() {
        let a = T::real(qi(q, head_sum(eta, caps, k)));
        let b = qr * T::real(qi(q, tail_sum(xi, caps, k + 2)));
        acc *= f(eta[k], xi[k], a, b, v, caps[k], q)?;
    }
    Ok(acc)
}

/// Nested q-Hahn product `P^v_R(eta, xi)`.
pub fn p_product<T: Scalar>(eta: &[u32], xi: &[u32], caps: &[u32], qr: T, v: T, q: f64) -> Result<T> {
    hahn_type_product(p_site::<T>, eta, xi, caps, qr, v, q)
}

/// Variant `P'_R` built from `p'`.
pub fn p_prime_product<T: Scalar>(eta: &[u32], xi: &[u32], caps: &[u32], qr: T, v: T, q: f64) -> Result<T> {
    hahn_type_product(p_prime_site::<T>, eta, xi, caps, qr, v, q)
}

/// Quantum q-Krawtchouk self-duality `K^v_qtm`.
pub fn k_qtm_product<T: Scalar>(eta: &[u32], xi: &[u32], caps: &[u32], v: T, q: f64) -> Result<T> {
    hahn_type_product(k_qtm_site::<T>, eta, xi, caps, T::one(), v, q)
}

/// Affine q-Krawtchouk duality `K^v_aff`.
pub fn k_aff_product<T: Scalar>(eta: &[u32], xi: &[u32], caps: &[u32], v: T, q: f64) -> Result<T> {
    hahn_type_product(k_aff_site::<T>, eta, xi, caps, T::one(), v, q)
}

fn q_poch_f(a: f64, q: f64, n: u32) -> f64 {
    q_poch(a, q, n)
}

/// Triangular self-duality `D`, supported on `eta_k <= xi_k`.
pub fn d_tri(eta: &[u32], xi: &[u32], caps: &[u32], q: f64) -> f64 {
    if eta.iter().zip(xi).any(|(e, x)| e > x) {
        return 0.0;
    }
    let q2 = q * q;
    let mut acc = q.powf(-0.5 * u_sum(eta, caps) as f64);
    for k in 0..caps.len() {
        let (e, x, n) = (eta[k], xi[k] as f64, caps[k] as f64);
        let s = tail_sum(xi, caps, k + 2) as f64;
        acc *= q_poch_f(q.powf(-2.0 * x), q2, e) / q_poch_f(q.powf(-2.0 * n), q2, e)
            * q.powf(e as f64 * (2.0 * x - 1.5 * n - 0.5 + s));
    }
    acc
}

/// Triangular duality `D'` between `asep(q)` and `asep(1/q)`, supported on
/// `eta_k <= N_k - xi_k`.
pub fn d_tri_prime(eta: &[u32], xi: &[u32], caps: &[u32], q: f64) -> f64 {
    if (0..caps.len()).any(|k| eta[k] + xi[k] > caps[k]) {
        return 0.0;
    }
    let q2 = q * q;
    let mut acc = q.powf(-0.5 * u_sum(eta, caps) as f64);
    for k in 0..caps.len() {
        let (e, x, n) = (eta[k], xi[k] as f64, caps[k] as f64);
        let s = tail_sum(xi, caps, k + 2) as f64;
        acc *= q_poch_f(q.powf(2.0 * x - 2.0 * n), q2, e) / q_poch_f(q.powf(-2.0 * n), q2, e)
            * q.powf(e as f64 * (-2.0 * x + 0.5 * (n - 1.0) - s));
    }
    acc
}

/// Zero-range duality `prod_k q^{2 xi_k (zeta_1 + ... + zeta_k)}`.
pub fn d_tazrp(zeta: &[u32], xi: &[u32], q: f64) -> f64 {
    let mut prefix = 0i64;
    let mut e = 0i64;
    for (&z, &x) in zeta.iter().zip(xi) {
        prefix += z as i64;
        e += 2 * x as i64 * prefix;
    }
    q.powi(e as i32)
}

/// Symmetric Racah product `R_hat^v`.
pub fn r_hat_product(zeta: &[u32], xi: &[u32], caps: &[u32], lam: f64, rho: f64, v: f64) -> Result<f64> {
    (0..caps.len()).try_fold(1.0, |acc, k| {
        let l = lam + head_sum(zeta, caps, k) as f64;
        let r = rho + tail_sum(xi, caps, k + 2) as f64;
        Ok(acc * r_hat_site(zeta[k], xi[k], l, r, v, caps[k])?)
    })
}

/// Symmetric Hahn product `P_hat^v_R`.
pub fn p_hat_product(eta: &[u32], xi: &[u32], caps: &[u32], rho: f64, v: f64) -> Result<f64> {
    (0..caps.len()).try_fold(1.0, |acc, k| {
        let l = head_sum(eta, caps, k) as f64;
        let r = rho + tail_sum(xi, caps, k + 2) as f64;
        Ok(acc * p_hat_site(eta[k], xi[k], l, r, v, caps[k])?)
    })
}

/// Symmetric Krawtchouk product `K_hat^v`.
pub fn k_hat_product(eta: &[u32], xi: &[u32], caps: &[u32], v: f64) -> Result<f64> {
    (0..caps.len()).try_fold(1.0, |acc, k| Ok(acc * k_hat_site(eta[k], xi[k], v, caps[k])?))
}

/// `R^v` through its expansion over `K_L K_R w`.
pub fn r_sum(zeta: &[u32], xi: &[u32], caps: &[u32], lam: f64, rho: f64, v: f64, q: f64) -> Result<f64> {
    let sector = enumerate(caps, None)?;
    let (ql, qr) = (q.powf(lam), q.powf(rho));
    sector.states().iter().try_fold(0.0, |acc, eta| {
        let n: u32 = eta.iter().sum();
        let term = (-v).powi(n as i32)
            * k_l_product(eta, zeta, caps, ql, q)?
            * k_r_product(eta, xi, caps, qr, q)?
            * w_multi(eta, caps, q);
        Ok(acc + term)
    })
}

impl DualityEvaluator {
    pub fn new(family: Family, params: DualityParams) -> Result<Self> {
        let p = &params;
        if !(p.q > 0.0) || !p.q.is_finite() {
            return Err(Error::InvalidArgument(format!("q must be positive, got {}", p.q)));
        }
        if family.uses_v() && (p.v == 0.0 || !p.v.is_finite()) {
            return Err(Error::InvalidArgument("v must be finite and nonzero".into()));
        }
        if family == Family::KHat && p.v < 0.0 {
            return Err(Error::InvalidArgument("K_hat needs v > 0".into()));
        }
        if p.capacities.is_empty() {
            return Err(Error::InvalidArgument("capacities must be nonempty".into()));
        }
        Ok(DualityEvaluator { family, params })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &DualityParams {
        &self.params
    }

    /// Value at a pair of occupation vectors.
    pub fn eval_raw(&self, left: &[u32], right: &[u32]) -> Result<f64> {
        let p = &self.params;
        let caps = &p.capacities[..];
        let q = p.q;
        let (ql, qr) = (q.powf(p.lambda), q.powf(p.rho));
        match self.family {
            Family::KR => k_r_product(left, right, caps, qr, q),
            Family::KL => k_l_product(left, right, caps, ql, q),
            Family::KLv => {
                let n: u32 = left.iter().sum();
                Ok((-p.v).powi(n as i32) * k_l_product(left, right, caps, ql, q)?)
            }
            Family::RvProduct => r_product(left, right, caps, ql, qr, p.v, q),
            Family::RvSum => r_sum(left, right, caps, p.lambda, p.rho, p.v, q),
            Family::PvR => p_product(left, right, caps, qr, p.v, q),
            Family::PPrimeR => p_prime_product(left, right, caps, qr, p.v, q),
            Family::KQtm => k_qtm_product(left, right, caps, p.v, q),
            Family::KAff => k_aff_product(left, right, caps, p.v, q),
            Family::DTri => Ok(d_tri(left, right, caps, q)),
            Family::DTriPrime => Ok(d_tri_prime(left, right, caps, q)),
            Family::DTazrp => Ok(d_tazrp(left, right, q)),
            Family::RHat => r_hat_product(left, right, caps, p.lambda, p.rho, p.v),
            Family::PHatR => p_hat_product(left, right, caps, p.rho, p.v),
            Family::KHat => k_hat_product(left, right, caps, p.v),
        }
    }

    /// Value at a pair of configurations on the evaluator's capacities
    /// (the zero-range family only needs matching lengths).
    pub fn eval(&self, left: &Configuration, right: &Configuration) -> Result<f64> {
        let caps = self.params.capacities.as_slice();
        let ok = if self.family == Family::DTazrp {
            left.sites() == right.sites()
        } else {
            left.capacities() == caps && right.capacities() == caps
        };
        if !ok {
            return Err(Error::InvalidArgument("configurations do not match the duality capacities".into()));
        }
        self.eval_raw(left.occupations(), right.occupations())
    }

    /// Dense matrix `D[i, j] = D(a_i, b_j)` over two sectors.
    pub fn matrix(&self, a: &StateSector, b: &StateSector) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = a
            .states()
            .par_iter()
            .map(|s| b.states().iter().map(|t| self.eval_raw(s, t)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
    }

    /// Processes acting on the two arguments, for all families except the
    /// zero-range one, whose capacities depend on the sectors.
    pub fn process_pair(&self) -> Result<(ProcessSpec, ProcessSpec)> {
        let p = &self.params;
        let (ka, kb) = self.family.process_kinds();
        let boundary = |k: ProcessKind| match k {
            ProcessKind::AsepR | ProcessKind::SsepR => p.rho,
            ProcessKind::AsepL | ProcessKind::SsepL => p.lambda,
            _ => 0.0,
        };
        let qb = match self.family {
            Family::KAff | Family::DTriPrime => 1.0 / p.q,
            _ => p.q,
        };
        let qa = if ka.is_symmetric() { 1.0 } else { p.q };
        let qb = if kb.is_symmetric() { 1.0 } else { qb };
        match self.family {
            Family::DTazrp => Err(Error::InvalidArgument("use tazrp_pair for the zero-range duality".into())),
            _ => Ok((
                ProcessSpec::new(ka, qa, boundary(ka), p.capacities.clone())?,
                ProcessSpec::new(kb, qb, boundary(kb), p.capacities.clone())?,
            )),
        }
    }
}

/// Zero-range pair on `m` sites with `nz` and `nx` particles; capacities
/// equal the totals so no move is ever blocked.
pub fn tazrp_pair(q: f64, m: usize, nz: u32, nx: u32) -> Result<(ProcessSpec, ProcessSpec, StateSector, StateSector)> {
    let a = ProcessSpec::new(ProcessKind::TazrpLeft, q, 0.0, vec![nz.max(1); m])?;
    let b = ProcessSpec::new(ProcessKind::TazrpRight, q, 0.0, vec![nx.max(1); m])?;
    let sa = enumerate(&a.capacities, Some(nz))?;
    let sb = enumerate(&b.capacities, Some(nx))?;
    Ok((a, b, sa, sb))
}

/// `max |L_A D - D L_B^T|` normalized by the largest entry of either side,
/// floored at 1.
pub fn duality_residual_matrix(la: &DMatrix<f64>, lb: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let lhs = la * d;
    let rhs = d * lb.transpose();
    let scale = lhs.amax().max(rhs.amax()).max(1.0);
    (lhs - rhs).amax() / scale
}

/// Generator-level duality residual of `d` between the processes `a`
/// (first argument) and `b` (second argument) on the given sectors.
pub fn duality_residual(
    a: &ProcessSpec,
    b: &ProcessSpec,
    d: &DualityEvaluator,
    sector_a: &StateSector,
    sector_b: &StateSector,
) -> Result<f64> {
    let la = build_generator(a, sector_a)?.to_dense();
    let lb = build_generator(b, sector_b)?.to_dense();
    let dm = d.matrix(sector_a, sector_b)?;
    Ok(duality_residual_matrix(&la, &lb, &dm))
}

/// Duality residual on the full state spaces of the family's own processes.
pub fn family_duality_residual(d: &DualityEvaluator) -> Result<f64> {
    let (a, b) = d.process_pair()?;
    let s = enumerate(&a.capacities, None)?;
    duality_residual(&a, &b, d, &s, &s)
}

/// Deviation of the weighted Gram matrices from the prescribed diagonal.
///
/// Checks `sum_a Dp(a, i) Dm(a, j) mu_left(a) = delta_ij / mu_right(i)` and
/// the dual relation with the roles of the arguments swapped; entries are
/// scaled by `sqrt(|mu_right(i) mu_right(j)|)` (resp. `mu_left`).
pub fn biorthogonality_residual(dp: &DMatrix<f64>, dm: &DMatrix<f64>, mu_left: &[f64], mu_right: &[f64]) -> f64 {
    fn one_side(dp: &DMatrix<f64>, dm: &DMatrix<f64>, mu: &[f64], nu: &[f64]) -> f64 {
        let (n, m) = (dp.nrows(), dp.ncols());
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let g: f64 = (0..n).map(|a| dp[(a, i)] * dm[(a, j)] * mu[a]).sum();
                let target = if i == j { nu[i].signum() } else { 0.0 };
                worst = worst.max((g * (nu[i] * nu[j]).abs().sqrt() - target).abs());
            }
        }
        worst
    }
    let forward = one_side(dp, dm, mu_left, mu_right);
    let backward = one_side(&dp.transpose(), &dm.transpose(), mu_right, mu_left);
    forward.max(backward)
}

/// Orthogonality relations that are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthoCase {
    KR,
    KL,
    Rv,
    PvR,
    KQtm,
    KAff,
    RHat,
    PHatR,
    KHat,
}

impl OrthoCase {
    pub const ALL: [OrthoCase; 9] = [
        OrthoCase::KR,
        OrthoCase::KL,
        OrthoCase::Rv,
        OrthoCase::PvR,
        OrthoCase::KQtm,
        OrthoCase::KAff,
        OrthoCase::RHat,
        OrthoCase::PHatR,
        OrthoCase::KHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrthoCase::KR => "K_R",
            OrthoCase::KL => "K_L",
            OrthoCase::Rv => "R_v",
            OrthoCase::PvR => "P_v_R",
            OrthoCase::KQtm => "K_qtm",
            OrthoCase::KAff => "K_aff",
            OrthoCase::RHat => "R_hat",
            OrthoCase::PHatR => "P_hat_R",
            OrthoCase::KHat => "K_hat",
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, OrthoCase::RHat | OrthoCase::PHatR | OrthoCase::KHat)
    }
}

fn vector<F: Fn(&[u32]) -> Result<f64>>(s: &StateSector, f: F) -> Result<Vec<f64>> {
    s.states().iter().map(|x| f(x)).collect()
}

fn total(s: &[u32]) -> u32 {
    s.iter().sum()
}

/// Gram-matrix deviation for one orthogonality relation on the full state
/// space. Symmetric cases read `rho`, `lambda` and `v` as the classical
/// parameters and need them away from the poles of the weights.
pub fn orthogonality_residual(case: OrthoCase, p: &DualityParams) -> Result<f64> {
    let caps = &p.capacities[..];
    let s = enumerate(caps, None)?;
    let nn: u32 = caps.iter().sum();
    let q = p.q;
    let ev = |f: Family, v: f64| DualityEvaluator::new(f, DualityParams { v, ..p.clone() });
    let w = vector(&s, |x| Ok(w_multi(x, caps, q)))?;
    let om = |kind: OmegaKind, rho: f64| move |x: &[u32]| omega(kind, total(x), rho, p.v, nn, q);
    let scale = |a: &[f64], b: Vec<f64>| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
    let (dp, dm, mu, nu) = match case {
        OrthoCase::KR => {
            let d = ev(Family::KR, p.v)?.matrix(&s, &s)?;
            let wr = vector(&s, |x| w_r_generic(x, caps, q.powf(p.rho), q))?;
            (d.clone(), d, w, wr)
        }
        OrthoCase::KL => {
            let d = ev(Family::KL, p.v)?.matrix(&s, &s)?;
            let wl = vector(&s, |x| w_l_generic(x, caps, q.powf(p.lambda), q))?;
            (d.clone(), d, w, wl)
        }
        OrthoCase::Rv => {
            let d1 = ev(Family::RvProduct, p.v)?.matrix(&s, &s)?;
            let d2 = ev(Family::RvProduct, 1.0 / p.v)?.matrix(&s, &s)?;
            let wl = vector(&s, |x| w_l_generic(x, caps, q.powf(p.lambda), q))?;
            let wr = vector(&s, |x| w_r_generic(x, caps, q.powf(p.rho), q))?;
            (d1, d2, wl, wr)
        }
        OrthoCase::PvR => {
            let d = ev(Family::PvR, p.v)?.matrix(&s, &s)?;
            let wr = vector(&s, |x| w_r_generic(x, caps, q.powf(p.rho), q))?;
            let mu = scale(&w, vector(&s, om(OmegaKind::P, p.rho))?);
            let nu = scale(&wr, vector(&s, om(OmegaKind::PR, p.rho))?);
            (d.clone(), d, mu, nu)
        }
        OrthoCase::KQtm => {
            let d = ev(Family::KQtm, p.v)?.matrix(&s, &s)?;
            let mu = scale(&w, vector(&s, om(OmegaKind::Qtm, 0.0))?);
            let nu = scale(&w, vector(&s, om(OmegaKind::QtmR, 0.0))?);
            (d.clone(), d, mu, nu)
        }
        OrthoCase::KAff => {
            let d = ev(Family::KAff, p.v)?.matrix(&s, &s)?;
            let wi = vector(&s, |x| Ok(w_multi(x, caps, 1.0 / q)))?;
            let mu = scale(&w, vector(&s, om(OmegaKind::Aff, 0.0))?);
            let nu = scale(&wi, vector(&s, om(OmegaKind::AffR, 0.0))?);
            (d.clone(), d, mu, nu)
        }
        OrthoCase::RHat => {
            let d1 = ev(Family::RHat, p.v)?.matrix(&s, &s)?;
            let d2 = ev(Family::RHat, -p.v)?.matrix(&s, &s)?;
            let wl = vector(&s, |x| Ok(sign_pow(total(x)) * w_hat_l(x, caps, p.lambda)?))?;
            let wr = vector(&s, |x| Ok(sign_pow(total(x) + nn) * w_hat_r(x, caps, p.rho)?))?;
            (d1, d2, wl, wr)
        }
        OrthoCase::PHatR => {
            let d = ev(Family::PHatR, p.v)?.matrix(&s, &s)?;
            let wh = vector(&s, |x| Ok(w_hat(x, caps)))?;
            let mu = scale(&wh, vector(&s, om(OmegaKind::PHat, p.rho))?);
            let wr = vector(&s, |x| w_hat_r(x, caps, p.rho))?;
            let nu = scale(&wr, vector(&s, om(OmegaKind::PRHat, p.rho))?);
            (d.clone(), d, mu, nu)
        }
        OrthoCase::KHat => {
            let d = ev(Family::KHat, p.v)?.matrix(&s, &s)?;
            let wh = vector(&s, |x| Ok(w_hat(x, caps)))?;
            let nu = scale(&wh, vector(&s, om(OmegaKind::KHat, 0.0))?);
            (d.clone(), d, wh, nu)
        }
    };
    Ok(biorthogonality_residual(&dp, &dm, &mu, &nu))
}

/// `prod_k binom(N_k, x_k)`.
pub fn w_hat(x: &[u32], caps: &[u32]) -> f64 {
    x.iter().zip(caps).map(|(&a, &n)| binomial(n, a)).product()
}

/// Symmetric right-dynamic measure.
pub fn w_hat_r(x: &[u32], caps: &[u32], rho: f64) -> Result<f64> {
    (0..caps.len()).try_fold(1.0, |acc, k| Ok(acc * w_hat_one(x[k], caps[k], rho + tail_sum(x, caps, k + 2) as f64)?))
}

/// Symmetric left-dynamic measure.
pub fn w_hat_l(x: &[u32], caps: &[u32], lam: f64) -> Result<f64> {
    (0..caps.len()).try_fold(1.0, |acc, k| Ok(acc * w_hat_one(x[k], caps[k], lam + head_sum(x, caps, k) as f64)?))
}

/// Factors depending only on the particle totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    /// `c^v`
    Small,
    /// `C^v`
    Big,
}

/// An invariant factor with its arguments; `a = |zeta|`, `b = |xi|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantFactor {
    pub kind: InvariantKind,
    pub a: u32,
    pub b: u32,
    pub lambda: f64,
    pub rho: f64,
    pub v: f64,
    pub total: u32,
    pub q: f64,
}

fn checked_div(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 || !den.is_finite() {
        Err(Error::PoleHit(what.to_string()))
    } else {
        Ok(num / den)
    }
}

/// Closed form in the totals.
pub fn invariant_factor(f: &InvariantFactor) -> Result<f64> {
    let q = f.q;
    let q2 = q * q;
    let nn = f.total as f64;
    let (a, b) = (f.a as f64, f.b as f64);
    match f.kind {
        InvariantKind::Small => {
            if f.a > f.total {
                return Err(Error::IndexOutOfRange { index: f.a as usize, max: f.total as usize });
            }
            let num = q_poch_f(f.v * q.powf(f.lambda - f.rho + 2.0 * a - nn + 1.0), q2, f.total - f.a);
            let den = q_poch_f(f.v * q.powf(f.lambda - f.rho - 2.0 * b + nn + 1.0), q2, f.b);
            checked_div(num, den, "c^v")
        }
        InvariantKind::Big => {
            let base = -f.v * q.powf(f.lambda + f.rho - nn + 1.0);
            checked_div(q_poch_f(base, q2, f.b), q_poch_f(base, q2, f.a), "C^v")
        }
    }
}

/// Sitewise product whose value reduces to [`invariant_factor`].
pub fn invariant_product(
    kind: InvariantKind,
    zeta: &[u32],
    xi: &[u32],
    caps: &[u32],
    lam: f64,
    rho: f64,
    v: f64,
    q: f64,
) -> Result<f64> {
    let q2 = q * q;
    let mut acc = 1.0;
    for k in 0..caps.len() {
        let hm = lam + head_sum(zeta, caps, k) as f64;
        let hp = rho + tail_sum(xi, caps, k + 2) as f64;
        let (z, x, n) = (zeta[k] as f64, xi[k] as f64, caps[k] as f64);
        let (num, den) = match kind {
            InvariantKind::Small => (
                q_poch_f(v * q.powf(2.0 * z - hp + hm - n + 1.0), q2, caps[k]),
                q_poch_f(v * q.powf(-2.0 * x - hp + hm + n + 1.0), q2, zeta[k] + xi[k]),
            ),
            InvariantKind::Big => {
                let base = -v * q.powf(hp + hm - n + 1.0);
                (q_poch_f(base, q2, xi[k]), q_poch_f(base, q2, zeta[k]))
            }
        };
        acc *= checked_div(num, den, "invariant product")?;
    }
    Ok(acc)
}

fn small_c(a: u32, b: u32, lam: f64, rho: f64, v: f64, total: u32, q: f64) -> Result<f64> {
    invariant_factor(&InvariantFactor { kind: InvariantKind::Small, a, b, lambda: lam, rho, v, total, q })
}

fn big_c(a: u32, b: u32, lam: f64, rho: f64, v: f64, total: u32, q: f64) -> Result<f64> {
    invariant_factor(&InvariantFactor { kind: InvariantKind::Big, a, b, lambda: lam, rho, v, total, q })
}

/// `f(|eta|, |xi|) K_R` with `f = C^v` is again a duality function.
pub fn closure_residual(p: &DualityParams) -> Result<f64> {
    let d = DualityEvaluator::new(Family::KR, p.clone())?;
    let (a, b) = d.process_pair()?;
    let s = enumerate(&p.capacities, None)?;
    let nn: u32 = p.capacities.iter().sum();
    let mut dm = d.matrix(&s, &s)?;
    for i in 0..s.len() {
        for j in 0..s.len() {
            dm[(i, j)] *= big_c(total(s.state(i)), total(s.state(j)), 0.0, p.rho, p.v, nn, p.q)?;
        }
    }
    let la = build_generator(&a, &s)?.to_dense();
    let lb = build_generator(&b, &s)?.to_dense();
    Ok(duality_residual_matrix(&la, &lb, &dm))
}

/// `R^v(zeta, xi; lambda, rho, N; q) = R^v(rev xi, rev zeta; rho, lambda, rev N; 1/q)`.
pub fn racah_symmetry_residual(p: &DualityParams) -> Result<f64> {
    let caps = &p.capacities[..];
    let rcaps: Vec<u32> = caps.iter().rev().copied().collect();
    let s = enumerate(caps, None)?;
    let q = p.q;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for z in s.states() {
        for x in s.states() {
            let a = r_product(z, x, caps, q.powf(p.lambda), q.powf(p.rho), p.v, q)?;
            let rz: Vec<u32> = z.iter().rev().copied().collect();
            let rx: Vec<u32> = x.iter().rev().copied().collect();
            let qi = 1.0 / q;
            let b = r_product(&rx, &rz, &rcaps, qi.powf(p.rho), qi.powf(p.lambda), p.v, qi)?;
            worst = worst.max((a - b).abs());
            scale = scale.max(a.abs());
        }
    }
    Ok(worst / scale.max(1e-300))
}

/// Spread of `R^v(q) / R^{1/v}(1/q)` within classes of equal totals.
pub fn racah_inversion_residual(p: &DualityParams) -> Result<f64> {
    let caps = &p.capacities[..];
    let s = enumerate(caps, None)?;
    let q = p.q;
    let mut classes: std::collections::BTreeMap<(u32, u32), Vec<f64>> = Default::default();
    for z in s.states() {
        for x in s.states() {
            let a = r_product(z, x, caps, q.powf(p.lambda), q.powf(p.rho), p.v, q)?;
            let b = r_product(z, x, caps, (1.0 / q).powf(p.lambda), (1.0 / q).powf(p.rho), 1.0 / p.v, 1.0 / q)?;
            if a.abs() > 1e-10 && b.abs() > 1e-10 {
                classes.entry((total(z), total(x))).or_default().push(a / b);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for ratios in classes.values() {
        let r0 = ratios[0];
        for r in ratios {
            worst = worst.max((r / r0 - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Sitewise product versus closed form of both invariant factors.
pub fn invariant_identity_residual(p: &DualityParams) -> Result<f64> {
    let caps = &p.capacities[..];
    let s = enumerate(caps, None)?;
    let nn: u32 = caps.iter().sum();
    let mut worst: f64 = 0.0;
    for z in s.states() {
        for x in s.states() {
            for kind in [InvariantKind::Small, InvariantKind::Big] {
                let prod = invariant_product(kind, z, x, caps, p.lambda, p.rho, p.v, p.q)?;
                let closed = invariant_factor(&InvariantFactor {
                    kind,
                    a: total(z),
                    b: total(x),
                    lambda: p.lambda,
                    rho: p.rho,
                    v: p.v,
                    total: nn,
                    q: p.q,
                })?;
                worst = worst.max((prod - closed).abs() / closed.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

/// Limit arrows probed at a finite scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitCase {
    WRToWMinus,
    WRToWPlus,
    WLToWPlus,
    WLToWMinus,
    AsepRRatesMinus,
    AsepRRatesPlus,
    AsepLRatesPlus,
    AsepLRatesMinus,
    PvRFromRv,
    PvRFromRvInverse,
    KQtmFromPvR,
    KAffFromPvR,
    KRFromPvRVZero,
    KRToTriangular,
    KRToTriangularPrime,
    RvToTazrp,
    AsepRToTazrpRates,
    AsepLToTazrpRates,
    RToRHat,
    PToPHat,
    KRToKHat,
    WRToWHat,
    WLToWHat,
    WRToBinomial,
    WRToBernoulli,
    WLToBernoulli,
    AsepRToSsepRRates,
    AsepLToSsepLRates,
    AsepToSsepRates,
}

impl LimitCase {
    pub const ALL: [LimitCase; 29] = [
        LimitCase::WRToWMinus,
        LimitCase::WRToWPlus,
        LimitCase::WLToWPlus,
        LimitCase::WLToWMinus,
        LimitCase::AsepRRatesMinus,
        LimitCase::AsepRRatesPlus,
        LimitCase::AsepLRatesPlus,
        LimitCase::AsepLRatesMinus,
        LimitCase::PvRFromRv,
        LimitCase::PvRFromRvInverse,
        LimitCase::KQtmFromPvR,
        LimitCase::KAffFromPvR,
        LimitCase::KRFromPvRVZero,
        LimitCase::KRToTriangular,
        LimitCase::KRToTriangularPrime,
        LimitCase::RvToTazrp,
        LimitCase::AsepRToTazrpRates,
        LimitCase::AsepLToTazrpRates,
        LimitCase::RToRHat,
        LimitCase::PToPHat,
        LimitCase::KRToKHat,
        LimitCase::WRToWHat,
        LimitCase::WLToWHat,
        LimitCase::WRToBinomial,
        LimitCase::WRToBernoulli,
        LimitCase::WLToBernoulli,
        LimitCase::AsepRToSsepRRates,
        LimitCase::AsepLToSsepLRates,
        LimitCase::AsepToSsepRates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LimitCase::WRToWMinus => "WR_to_w_minus",
            LimitCase::WRToWPlus => "WR_to_w_plus",
            LimitCase::WLToWPlus => "WL_to_w_plus",
            LimitCase::WLToWMinus => "WL_to_w_minus",
            LimitCase::AsepRRatesMinus => "asepR_rates_minus",
            LimitCase::AsepRRatesPlus => "asepR_rates_plus",
            LimitCase::AsepLRatesPlus => "asepL_rates_plus",
            LimitCase::AsepLRatesMinus => "asepL_rates_minus",
            LimitCase::PvRFromRv => "PvR_from_Rv",
            LimitCase::PvRFromRvInverse => "PvR_from_Rv_inverse",
            LimitCase::KQtmFromPvR => "Kqtm_from_PvR",
            LimitCase::KAffFromPvR => "Kaff_from_PvR",
            LimitCase::KRFromPvRVZero => "KR_from_PvR_v0",
            LimitCase::KRToTriangular => "KR_to_triangular",
            LimitCase::KRToTriangularPrime => "KR_to_triangular_prime",
            LimitCase::RvToTazrp => "Rv_to_tazrp",
            LimitCase::AsepRToTazrpRates => "asepR_to_tazrp_rates",
            LimitCase::AsepLToTazrpRates => "asepL_to_tazrp_rates",
            LimitCase::RToRHat => "R_to_Rhat",
            LimitCase::PToPHat => "P_to_Phat",
            LimitCase::KRToKHat => "KR_to_Khat",
            LimitCase::WRToWHat => "WR_to_What",
            LimitCase::WLToWHat => "WL_to_What",
            LimitCase::WRToBinomial => "WR_to_binomial",
            LimitCase::WRToBernoulli => "WR_to_bernoulli",
            LimitCase::WLToBernoulli => "WL_to_bernoulli",
            LimitCase::AsepRToSsepRRates => "asepR_to_ssepR_rates",
            LimitCase::AsepLToSsepLRates => "asepL_to_ssepL_rates",
            LimitCase::AsepToSsepRates => "asep_to_ssep_rates",
        }
    }

    /// Limits in `q -> 1`, probed at `q = 1 - scale`.
    pub fn is_q_to_one(self) -> bool {
        use LimitCase::*;
        matches!(
            self,
            RToRHat
                | PToPHat
                | KRToKHat
                | WRToWHat
                | WLToWHat
                | WRToBinomial
                | WRToBernoulli
                | WLToBernoulli
                | AsepRToSsepRRates
                | AsepLToSsepLRates
                | AsepToSsepRates
        )
    }

    /// Scale at which the limit is probed: `|rho|` or `|lambda|` for the
    /// boundary limits, `1 - q` for `q -> 1`, the site capacity for the
    /// zero-range limits and `v` itself for `v -> 0`.
    pub fn default_scale(self) -> f64 {
        use LimitCase::*;
        match self {
            _ if self.is_q_to_one() => 1e-5,
            RvToTazrp | AsepRToTazrpRates | AsepLToTazrpRates => 40.0,
            KRFromPvRVZero => 1e-6,
            _ => 40.0,
        }
    }

    pub fn tolerance(self) -> f64 {
        if self.is_q_to_one() {
            1e-3
        } else {
            1e-6
        }
    }
}

impl FromStr for LimitCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LimitCase::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown limit case '{s}'")))
    }
}

/// Fixed parameters of the degeneration harness. The symmetric limits use
/// `rho_hat`, `lambda_hat` and `v_hat`, chosen away from the poles.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSetup {
    pub q: f64,
    pub capacities: Vec<u32>,
    pub rho: f64,
    pub lambda: f64,
    pub v: f64,
    pub rho_hat: f64,
    pub lambda_hat: f64,
    pub v_hat: f64,
}

impl Default for LimitSetup {
    fn default() -> Self {
        let capacities = vec![1, 2];
        let nn: u32 = capacities.iter().sum();
        LimitSetup {
            q: 0.5,
            capacities,
            rho: 0.7,
            lambda: -0.4,
            v: 0.6,
            rho_hat: -(nn as f64 + 0.6),
            lambda_hat: nn as f64 + 0.4,
            v_hat: 0.6,
        }
    }
}

/// Relative deviation `max |a - b| / max |b|` of two value lists.
fn rel_dev<T: Scalar>(a: &[T], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let worst = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((*x - T::real(*y)).modulus()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Largest per-entry relative deviation; for strictly positive targets.
fn pointwise_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x / y - 1.0).abs()))
}

fn pairs(s: &StateSector) -> impl Iterator<Item = (&[u32], &[u32])> + '_ {
    s.states().iter().flat_map(move |a| s.states().iter().map(move |b| (a.as_slice(), b.as_slice())))
}

/// Collects `(scaled, target)` over all state pairs.
fn pair_values<T: Scalar, F, G>(s: &StateSector, f: F, g: G) -> Result<f64>
where
    F: Fn(&[u32], &[u32]) -> Result<T>,
    G: Fn(&[u32], &[u32]) -> Result<f64>,
{
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (x, y) in pairs(s) {
        a.push(f(x, y)?);
        b.push(g(x, y)?);
    }
    Ok(rel_dev(&a, &b))
}

/// Compares every transition rate of `spec_a` (scaled by `factor`) with the
/// rate of `spec_b` for the same move; normalized by the largest target.
fn rate_dev(
    spec_a: &ProcessSpec,
    spec_b: &ProcessSpec,
    factor: f64,
    rate_a: Option<&dyn Fn(&[u32], usize, Direction) -> Result<f64>>,
) -> Result<f64> {
    let s = enumerate(&spec_a.capacities, None)?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for st in s.states() {
        for k in 0..st.len() {
            for dir in [Direction::Right, Direction::Left] {
                let ra = match rate_a {
                    Some(f) => f(st, k, dir)?,
                    None => raw_rate(spec_a, st, k, dir)?,
                };
                a.push(factor * ra);
                b.push(raw_rate(spec_b, st, k, dir)?);
            }
        }
    }
    Ok(rel_dev(&a, &b))
}

/// Evaluates the scaled pre-limit expression of `case` at `scale` against
/// its limit and returns the relative deviation.
pub fn degeneration_residual(case: LimitCase, scale: f64) -> Result<f64> {
    degeneration_residual_with(case, scale, &LimitSetup::default())
}

/// [`degeneration_residual`] with explicit parameters.
pub fn degeneration_residual_with(case: LimitCase, scale: f64, st: &LimitSetup) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let caps = &st.capacities[..];
    let nn: u32 = caps.iter().sum();
    let b = nn as f64;
    let s = enumerate(caps, None)?;
    let q = st.q;
    let v = st.v;
    let tot = |x: &[u32]| x.iter().sum::<u32>();
    let w_list = |qq: f64, e: &dyn Fn(f64) -> f64| -> Vec<f64> {
        s.states().iter().map(|x| qq.powf(0.0) * q.powf(e(tot(x) as f64)) * w_multi(x, caps, qq)).collect()
    };
    use LimitCase::*;
    match case {
        WRToWMinus | WRToWPlus | WLToWPlus | WLToWMinus => {
            let (lhs, rhs): (Vec<f64>, Vec<f64>) = match case {
                WRToWMinus => {
                    let rho = -scale;
                    let l =
                        vector(&s, |x| Ok(q.powf(2.0 * rho * tot(x) as f64) * w_r_generic(x, caps, q.powf(rho), q)?))?;
                    (l, w_list(q, &|a| a * (1.0 - 2.0 * a + 2.0 * b)))
                }
                WRToWPlus => {
                    let rho = scale;
                    let l = vector(&s, |x| {
                        Ok(q.powf(2.0 * rho * (tot(x) as f64 - b)) * w_r_generic(x, caps, q.powf(rho), q)?)
                    })?;
                    (l, w_list(1.0 / q, &|a| b - a * (a + 1.0) - (b - a) * (b - a)))
                }
                WLToWPlus => {
                    let lam = scale;
                    let l =
                        vector(&s, |x| Ok(q.powf(-2.0 * lam * tot(x) as f64) * w_l_generic(x, caps, q.powf(lam), q)?))?;
                    (l, w_list(q, &|a| a * (2.0 * a - 1.0)))
                }
                _ => {
                    let lam = -scale;
                    let l = vector(&s, |x| {
                        Ok(q.powf(2.0 * lam * (b - tot(x) as f64)) * w_l_generic(x, caps, q.powf(lam), q)?)
                    })?;
                    (l, w_list(1.0 / q, &|a| -b + a * (a + 1.0) + (b - a) * (b - a) - 2.0 * a * b))
                }
            };
            Ok(pointwise_rel(&lhs, &rhs))
        }
        AsepRRatesMinus | AsepRRatesPlus | AsepLRatesPlus | AsepLRatesMinus => {
            let (kind, bnd, q_target) = match case {
                AsepRRatesMinus => (ProcessKind::AsepR, -scale, q),
                AsepRRatesPlus => (ProcessKind::AsepR, scale, 1.0 / q),
                AsepLRatesPlus => (ProcessKind::AsepL, scale, q),
                _ => (ProcessKind::AsepL, -scale, 1.0 / q),
            };
            let a = ProcessSpec::new(kind, q, bnd, caps.to_vec())?;
            let t = ProcessSpec::new(ProcessKind::Asep, q_target, 0.0, caps.to_vec())?;
            rate_dev(&a, &t, 1.0, None)
        }
        PvRFromRv => {
            let lam = scale;
            let vq = v * q.powf(-lam);
            pair_values(
                &s,
                |z, x| {
                    Ok(q.powf(2.0 * lam * tot(z) as f64) * r_product(z, x, caps, q.powf(lam), q.powf(st.rho), vq, q)?)
                },
                |z, x| p_product(z, x, caps, q.powf(st.rho), v, q),
            )
        }
        PvRFromRvInverse => {
            let lam = scale;
            let vq = q.powf(lam) / v;
            pair_values(
                &s,
                |z, x| {
                    let (a, bb) = (tot(z), tot(x));
                    let f = v.powi(2 * a as i32)
                        * small_c(a, bb, 0.0, st.rho, v, nn, q)?
                        * big_c(a, bb, 0.0, st.rho, v, nn, q)?;
                    Ok(f * r_product(z, x, caps, q.powf(lam), q.powf(st.rho), vq, q)?)
                },
                |z, x| p_product(z, x, caps, q.powf(st.rho), v, q),
            )
        }
        KQtmFromPvR => {
            let rho = -scale;
            pair_values(
                &s,
                |e, x| {
                    let (a, bb) = (tot(e), tot(x));
                    let pref = (v.powi(-2) * q.powf(-2.0 * rho)).powi(a as i32)
                        / (small_c(a, bb, 0.0, 0.0, v, nn, q)? * big_c(a, bb, 0.0, 2.0 * rho, v, nn, q)?);
                    Ok(pref * p_product(e, x, caps, q.powf(rho), v * q.powf(rho), q)?)
                },
                |e, x| k_qtm_product(e, x, caps, v, q),
            )
        }
        KAffFromPvR => {
            let rho = scale;
            pair_values(
                &s,
                |e, x| {
                    let (a, bb) = (tot(e), tot(x));
                    let pref = q.powf(2.0 * rho * a as f64) / small_c(a, bb, 0.0, 2.0 * rho, -v, nn, q)?;
                    Ok(pref * p_product(e, x, caps, q.powf(rho), -v * q.powf(-rho), q)?)
                },
                |e, x| k_aff_product(e, x, caps, v, q),
            )
        }
        KRFromPvRVZero => {
            let eps = scale;
            let qr = q.powf(st.rho);
            pair_values(
                &s,
                |e, x| Ok(eps.powi(-(tot(e) as i32)) * p_product(e, x, caps, qr, eps, q)?),
                |e, x| {
                    let a = tot(e) as f64;
                    Ok(sign_pow(tot(e)) * q.powf(-a * (2.0 * a - 1.0) / 2.0) * k_r_product(e, x, caps, qr, q)?)
                },
            )
        }
        KRToTriangular => {
            let rho = -scale;
            pair_values(
                &s,
                |e, x| Ok(q.powf(-rho * tot(e) as f64) * k_r_product(e, x, caps, q.powf(rho), q)?),
                |e, x| Ok(d_tri(e, x, caps, q)),
            )
        }
        KRToTriangularPrime => {
            let rho = scale;
            pair_values(
                &s,
                |e, x| Ok((-q.powf(rho)).powi(tot(e) as i32) * k_r_product(e, x, caps, q.powf(rho), q)?),
                |e, x| Ok(d_tri_prime(e, x, caps, q)),
            )
        }
        RvToTazrp => {
            let n_site = scale.round() as u32;
            let m = caps.len().max(2);
            let big = vec![n_site; m];
            let total_n = n_site * m as u32;
            let (sz, sx) = (enumerate(&big, Some(2))?, enumerate(&big, Some(3))?);
            let (lam, rho) = (st.lambda, st.rho);
            let mut a = Vec::new();
            let mut t = Vec::new();
            for z in sz.states() {
                for x in sx.states() {
                    let (za, xb) = (tot(z), tot(x) as f64);
                    let pref = v.powf(-xb) * q.powf(-xb * (xb + rho + lam)) * q.powf(xb * total_n as f64)
                        / small_c(za, tot(x), lam, rho, v, total_n, q)?;
                    a.push(pref * r_product(z, x, &big, q.powf(lam), q.powf(rho), v, q)?);
                    t.push(d_tazrp(z, x, q));
                }
            }
            Ok(rel_dev(&a, &t))
        }
        AsepRToTazrpRates | AsepLToTazrpRates => {
            let n_site = scale.round() as u32;
            let m = caps.len().max(3);
            let big = vec![n_site; m];
            let (kind, target, bnd) = match case {
                AsepRToTazrpRates => (ProcessKind::AsepR, ProcessKind::TazrpRight, st.rho),
                _ => (ProcessKind::AsepL, ProcessKind::TazrpLeft, st.lambda),
            };
            let a = ProcessSpec::new(kind, q, bnd, big.clone())?;
            let t = ProcessSpec::new(target, q, 0.0, big.clone())?;
            let factor = (1.0 / q - q) * q.powf(2.0 * n_site as f64);
            let sec = enumerate(&big, Some(3))?;
            let mut ra = Vec::new();
            let mut rb = Vec::new();
            for x in sec.states() {
                for k in 0..m {
                    for dir in [Direction::Right, Direction::Left] {
                        ra.push(factor * raw_rate(&a, x, k, dir)?);
                        rb.push(raw_rate(&t, x, k, dir)?);
                    }
                }
            }
            Ok(rel_dev(&ra, &rb))
        }
        _ => q_to_one(case, scale, st, &s),
    }
}

fn twisted(q: f64, x: f64) -> Complex64 {
    Complex64::new(0.0, q.powf(x))
}

fn q_to_one(case: LimitCase, eps: f64, st: &LimitSetup, s: &StateSector) -> Result<f64> {
    let caps = &st.capacities[..];
    let nn: u32 = caps.iter().sum();
    let q = 1.0 - eps;
    // symmetric normalization, the denominator of [n]_q
    let damp = 1.0 / q - q;
    let tot = |x: &[u32]| x.iter().sum::<u32>();
    let (rho, lam, v) = (st.rho_hat, st.lambda_hat, st.v_hat);
    use LimitCase::*;
    match case {
        RToRHat => pair_values(
            s,
            |z, x| {
                let r = r_product(z, x, caps, twisted(q, lam), twisted(q, rho), Complex64::new(q.powf(v), 0.0), q)?;
                Ok(r / damp.powi(nn as i32))
            },
            |z, x| Ok(sign_pow(tot(z)) * r_hat_product(z, x, caps, lam, rho, v)?),
        ),
        PToPHat => pair_values(
            s,
            |e, x| {
                let p = p_product(e, x, caps, twisted(q, rho), twisted(q, v), q)?;
                Ok(p * damp.powi(tot(e) as i32 - nn as i32))
            },
            |e, x| p_hat_product(e, x, caps, rho, v),
        ),
        KRToKHat => pair_values(
            s,
            |e, x| Ok(sign_pow(tot(e)) * k_r_product(e, x, caps, v.sqrt(), q)?),
            |e, x| k_hat_product(e, x, caps, v),
        ),
        WRToWHat | WLToWHat | WRToBinomial | WRToBernoulli | WLToBernoulli => {
            let mut a: Vec<Complex64> = Vec::new();
            let mut t = Vec::new();
            let p = 1.0 / (1.0 + v);
            for x in s.states() {
                let n = tot(x);
                let (val, target) = match case {
                    WRToWHat => (
                        w_r_generic(x, caps, twisted(q, rho), q)? * damp.powi(nn as i32),
                        sign_pow(n) * w_hat_r(x, caps, rho)?,
                    ),
                    WLToWHat => (
                        w_l_generic(x, caps, twisted(q, lam), q)? * damp.powi(nn as i32),
                        sign_pow(n + nn) * w_hat_l(x, caps, lam)?,
                    ),
                    WRToBinomial => (
                        Complex64::from(w_r_generic(x, caps, q.powf(st.rho), q)?),
                        2f64.powi(-(nn as i32)) * w_hat(x, caps),
                    ),
                    WRToBernoulli => (
                        Complex64::from(w_r_generic(x, caps, v.sqrt(), q)?),
                        p.powi(n as i32) * (1.0 - p).powi((nn - n) as i32) * w_hat(x, caps),
                    ),
                    _ => (
                        Complex64::from(w_l_generic(x, caps, 1.0 / v.sqrt(), q)?),
                        p.powi(n as i32) * (1.0 - p).powi((nn - n) as i32) * w_hat(x, caps),
                    ),
                };
                a.push(val);
                t.push(target);
            }
            Ok(rel_dev(&a, &t))
        }
        AsepRToSsepRRates => {
            let a = ProcessSpec::new(ProcessKind::AsepR, q, rho, caps.to_vec())?;
            let t = ProcessSpec::new(ProcessKind::SsepR, 1.0, rho, caps.to_vec())?;
            let f = |x: &[u32], k: usize, d: Direction| -> Result<f64> {
                if !move_allowed(x, caps, k, d) {
                    return Ok(0.0);
                }
                asep_r_rate_signed(x, caps, q, rho, -1.0, k, d)
            };
            rate_dev(&a, &t, 1.0, Some(&f))
        }
        AsepLToSsepLRates => {
            let a = ProcessSpec::new(ProcessKind::AsepL, q, lam, caps.to_vec())?;
            let t = ProcessSpec::new(ProcessKind::SsepL, 1.0, lam, caps.to_vec())?;
            let f = |x: &[u32], k: usize, d: Direction| -> Result<f64> {
                if !move_allowed(x, caps, k, d) {
                    return Ok(0.0);
                }
                asep_l_rate_signed(x, caps, q, lam, -1.0, k, d)
            };
            rate_dev(&a, &t, 1.0, Some(&f))
        }
        AsepToSsepRates => {
            let a = ProcessSpec::new(ProcessKind::Asep, q, 0.0, caps.to_vec())?;
            let t = ProcessSpec::new(ProcessKind::Ssep, 1.0, 0.0, caps.to_vec())?;
            rate_dev(&a, &t, 1.0, None)
        }
        _ => Err(Error::InvalidArgument(format!("{} is not a q -> 1 limit", case.name()))),
    }
}

fn move_allowed(x: &[u32], caps: &[u32], k: usize, d: Direction) -> bool {
    let to = match d {
        Direction::Right if k + 1 < caps.len() => k + 1,
        Direction::Left if k >= 1 => k - 1,
        _ => return false,
    };
    x[k] > 0 && x[to] < caps[to]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(q: f64, rho: f64, lambda: f64, v: f64, caps: &[u32]) -> DualityParams {
        DualityParams { q, rho, lambda, v, capacities: caps.to_vec() }
    }

    fn ev(f: Family, p: &DualityParams) -> DualityEvaluator {
        DualityEvaluator::new(f, p.clone()).unwrap()
    }

    #[test]
    fn kr_at_empty_left_is_one() {
        let p = params(0.6, 0.4, 0.0, 1.0, &[1, 2, 1]);
        let s = enumerate(&p.capacities, None).unwrap();
        let d = ev(Family::KR, &p);
        for x in s.states() {
            assert!((d.eval_raw(&[0, 0, 0], x).unwrap() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn tazrp_trivial_values() {
        assert_eq!(d_tazrp(&[0, 0, 0], &[1, 2, 0], 0.3), 1.0);
        assert_eq!(d_tazrp(&[1, 2, 0], &[0, 0, 0], 0.3), 1.0);
    }

    #[test]
    fn racah_product_equals_sum() {
        let p = params(0.7, 0.3, -0.4, 1.3, &[1, 2]);
        let s = enumerate(&p.capacities, None).unwrap();
        let a = ev(Family::RvProduct, &p);
        let b = ev(Family::RvSum, &p);
        for z in s.states() {
            for x in s.states() {
                let (u, w) = (a.eval_raw(z, x).unwrap(), b.eval_raw(z, x).unwrap());
                assert!((u - w).abs() <= 1e-10 * u.abs().max(1.0), "{z:?} {x:?} {u} {w}");
            }
        }
    }

    #[test]
    fn residual_examples() {
        let p = params(0.6, 0.4, 0.0, 1.0, &[1, 2, 1]);
        assert!(family_duality_residual(&ev(Family::KR, &p)).unwrap() < 1e-9);
        let p = params(0.6, 0.0, 0.4, 1.0, &[1, 2, 1]);
        assert!(family_duality_residual(&ev(Family::KL, &p)).unwrap() < 1e-9);
        let d = ev(Family::KR, &p);
        let (a, b) = d.process_pair().unwrap();
        let z = enumerate(&p.capacities, Some(0)).unwrap();
        assert_eq!(duality_residual(&a, &b, &d, &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn every_family_is_a_duality() {
        for f in Family::ALL {
            if f == Family::DTazrp {
                continue;
            }
            let p = if matches!(f, Family::RHat | Family::PHatR | Family::KHat) {
                params(1.0, -3.6, 3.4, 0.6, &[1, 2])
            } else {
                params(0.8, -1.2, 0.7, 1.5, &[2, 1])
            };
            let r = family_duality_residual(&ev(f, &p)).unwrap();
            assert!(r < 1e-9, "{f}: {r}");
        }
        let (a, b, sa, sb) = tazrp_pair(0.5, 3, 2, 3).unwrap();
        let d = ev(Family::DTazrp, &params(0.5, 0.0, 0.0, 1.0, &[1, 1, 1]));
        assert!(duality_residual(&a, &b, &d, &sa, &sb).unwrap() < 1e-12);
    }

    #[test]
    fn invariant_examples() {
        let f =
            InvariantFactor { kind: InvariantKind::Big, a: 2, b: 2, lambda: 0.3, rho: -0.2, v: 0.7, total: 4, q: 0.6 };
        assert_eq!(invariant_factor(&f).unwrap(), 1.0);
        let f = InvariantFactor { kind: InvariantKind::Small, a: 4, b: 1, ..f };
        let den = q_poch_f(0.7 * 0.6f64.powf(0.5 - 2.0 + 4.0 + 1.0), 0.36, 1);
        assert!((invariant_factor(&f).unwrap() - 1.0 / den).abs() < 1e-14);
        let p = params(0.6, 0.4, -0.3, 0.8, &[1, 2, 1]);
        assert!(invariant_identity_residual(&p).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonality_examples() {
        let p = params(0.6, 0.3, -0.4, 1.3, &[2]);
        assert!(orthogonality_residual(OrthoCase::KR, &p).unwrap() < 1e-10);
        let p = params(0.6, 0.3, -0.4, 1.3, &[1, 1]);
        assert!(orthogonality_residual(OrthoCase::Rv, &p).unwrap() < 1e-9);
        let p = params(1.0, -3.6, 3.4, 0.8, &[2, 1]);
        assert!(orthogonality_residual(OrthoCase::KHat, &p).unwrap() < 1e-9);
    }

    #[test]
    fn every_orthogonality_holds() {
        for c in OrthoCase::ALL {
            for caps in [&[2u32][..], &[1, 2][..], &[2, 1, 1][..]] {
                let nn: u32 = caps.iter().sum();
                let p = if c.is_symmetric() {
                    params(1.0, -(nn as f64 + 0.6), nn as f64 + 0.4, 0.6, caps)
                } else {
                    params(0.7, 0.3, -0.4, 1.3, caps)
                };
                let r = orthogonality_residual(c, &p).unwrap();
                assert!(r < 1e-8, "{} {caps:?}: {r}", c.name());
            }
        }
    }

    #[test]
    fn symmetry_properties() {
        let p = params(0.7, 0.3, -0.4, 1.3, &[1, 2]);
        assert!(racah_symmetry_residual(&p).unwrap() < 1e-10);
        assert!(racah_inversion_residual(&p).unwrap() < 1e-9);
        assert!(closure_residual(&p).unwrap() < 1e-9);
    }

    #[test]
    fn limit_examples() {
        assert!(degeneration_residual(LimitCase::WRToWMinus, 40.0).unwrap() < 1e-6);
        assert!(degeneration_residual(LimitCase::PvRFromRv, 40.0).unwrap() < 1e-6);
        assert!(degeneration_residual(LimitCase::KRToTriangular, 40.0).unwrap() < 1e-8);
        // outside the support the scaled K_R decays with the scale
        let caps = [1u32, 2];
        let q: f64 = 0.5;
        let rho = -40.0;
        let k = q.powf(-rho) * k_r_product(&[1, 0], &[0, 2], &caps, q.powf(rho), q).unwrap();
        assert!(k.abs() < 1e-8);
    }

    #[test]
    fn every_limit_converges() {
        for c in LimitCase::ALL {
            let r = degeneration_residual(c, c.default_scale()).unwrap();
            assert!(r < c.tolerance(), "{}: {r}", c.name());
        }
    }

    #[test]
    fn limits_are_not_trivially_zero() {
        // away from the limit the deviations are visible
        for c in [LimitCase::WRToWMinus, LimitCase::PvRFromRv, LimitCase::KRToTriangular, LimitCase::RToRHat] {
            let far = if c.is_q_to_one() { 0.3 } else { 1.0 };
            assert!(degeneration_residual(c, far).unwrap() > 1e-4, "{}", c.name());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn invariant_product_matches_closed_form(
            z in prop::collection::vec(0u32..=2, 3),
            x in prop::collection::vec(0u32..=2, 3),
            lam in -1.5f64..1.5, rho in -1.5f64..1.5, v in 0.3f64..2.0, q in 0.4f64..0.9,
        ) {
            let caps = [2u32, 2, 2];
            let nn = 6;
            let (a, b): (u32, u32) = (z.iter().sum(), x.iter().sum());
            for kind in [InvariantKind::Small, InvariantKind::Big] {
                let prod = invariant_product(kind, &z, &x, &caps, lam, rho, v, q);
                let closed = invariant_factor(&InvariantFactor { kind, a, b, lambda: lam, rho, v, total: nn, q });
                if let (Ok(p), Ok(c)) = (prod, closed) {
                    prop_assert!((p - c).abs() <= 1e-10 * c.abs().max(1.0));
                }
            }
        }

        #[test]
        fn kr_duality_on_random_parameters(q in 0.3f64..0.95, rho in -2.0f64..2.0) {
            let p = params(q, rho, 0.0, 1.0, &[1, 2]);
            prop_assert!(family_duality_residual(&ev(Family::KR, &p)).unwrap() < 1e-9);
        }
    }
}
