//! Double-double evaluation of the kernels whose checks cancel heavily.
//!
//! The functions are generic over [`Real`], instantiated with `f64` and
//! [`Dd`]. Products are formed directly rather than in log-magnitude form,
//! so every factor keeps the full working precision; the ranges used here
//! stay far from overflow.

use crate::dualities::OrthoCase;
use crate::error::{Error, Result};
use crate::lattice::{enumerate, head_sum, tail_sum, u_sum};
use crate::qspecial::{recurrence_coeff, RecKind, Recurrence};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use twofloat::TwoFloat;

const POLE_EPS: f64 = 1e-13;

/// Arithmetic used by the precise kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Double,
    #[default]
    DoubleDouble,
}

/// Real field of the precise kernels.
pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn zero() -> Self {
        Self::of(0.0)
    }
    fn one() -> Self {
        Self::of(1.0)
    }
    fn signum(self) -> Self {
        Self::of(self.to_f64().signum())
    }
    fn powi(self, n: i32) -> Self {
        let mut result = Self::one();
        let mut base = self;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            k >>= 1;
        }
        if n < 0 {
            Self::one() / result
        } else {
            result
        }
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Double-double number. Addition, multiplication and square roots come
/// from `twofloat`; division is redone by long division because the
/// crate's quotient is only accurate to double precision.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dd(pub TwoFloat);

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        Dd(self.0 + o.0)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        Dd(self.0 - o.0)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        Dd(self.0 * o.0)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let b = o.0;
        let q1 = self.0.hi() / b.hi();
        let r = self.0 - b * q1;
        let q2 = r.hi() / b.hi();
        let r = r - b * q2;
        let q3 = r.hi() / b.hi();
        Dd(TwoFloat::from(q1) + q2 + q3)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

impl Real for Dd {
    fn of(x: f64) -> Self {
        Dd(TwoFloat::from(x))
    }
    fn to_f64(self) -> f64 {
        self.0.hi() + self.0.lo()
    }
    fn abs(self) -> Self {
        Dd(self.0.abs())
    }
    fn sqrt(self) -> Self {
        Dd(self.0.sqrt())
    }
}

fn pole<R: Real>(f: R, scale: R, what: &str) -> Result<()> {
    if f.abs().to_f64() <= POLE_EPS * scale.abs().to_f64().max(1.0) {
        Err(Error::PoleHit(what.to_string()))
    } else {
        Ok(())
    }
}

fn sign<R: Real>(n: u32) -> R {
    if n.is_multiple_of(2) {
        R::one()
    } else {
        -R::one()
    }
}

/// `(a; base)_n`.
pub fn poch<R: Real>(a: R, base: R, n: u32) -> R {
    let mut r = R::one();
    let mut qj = R::one();
    for _ in 0..n {
        r = r * (R::one() - a * qj);
        qj = qj * base;
    }
    r
}

/// `1 / (a; base)_n`, reporting vanishing factors.
pub fn poch_inv<R: Real>(a: R, base: R, n: u32, what: &str) -> Result<R> {
    let mut r = R::one();
    let mut qj = R::one();
    for _ in 0..n {
        let f = R::one() - a * qj;
        pole(f, a * qj, what)?;
        r = r / f;
        qj = qj * base;
    }
    Ok(r)
}

/// Gaussian binomial in base `b`.
pub fn q_binomial<R: Real>(n: u32, k: u32, b: R) -> R {
    if k > n {
        return R::zero();
    }
    (0..k).fold(R::one(), |r, j| r * (R::one() - b.powi((n - j) as i32)) / (R::one() - b.powi(j as i32 + 1)))
}

/// Terminating basic hypergeometric sum with explicit last index.
pub fn hyp<R: Real>(num: &[R], den: &[R], base: R, z: R, terms: usize) -> Result<R> {
    let excess = 1 + den.len() as i32 - num.len() as i32;
    let (mut sum, mut term, mut qj) = (R::one(), R::one(), R::one());
    for j in 1..=terms {
        for &a in num {
            term = term * (R::one() - a * qj);
        }
        for &b in den {
            let f = R::one() - b * qj;
            if f.abs().to_f64() <= POLE_EPS * (b * qj).abs().to_f64().max(1.0) {
                return Err(Error::DivergentTerm { term: j });
            }
            term = term / f;
        }
        qj = qj * base;
        let qq = R::one() - qj;
        term = term * z / qq;
        if excess != 0 {
            term = term * (-qj / base).powi(excess);
        }
        sum = sum + term;
    }
    Ok(sum)
}

/// `q^{e/2}` for integer `e`.
fn half_pow<R: Real>(q: R, e: i64) -> R {
    if e % 2 == 0 {
        q.powi((e / 2) as i32)
    } else {
        q.sqrt().powi(e as i32)
    }
}

/// One-site dual q-Krawtchouk function; `qh` is `q^rho`.
pub fn k_site<R: Real>(n: u32, x: u32, qh: R, nmax: u32, q: R) -> Result<R> {
    let (ni, xi, nn) = (n as i32, x as i32, nmax as i32);
    let q2 = q * q;
    let c = sign::<R>(n) * qh.powi(-ni) * half_pow(q, n as i64 * (nmax as i64 - 1));
    let poly = hyp(
        &[q.powi(-2 * ni), q.powi(-2 * xi), -(qh * qh) * q.powi(2 * xi - 2 * nn)],
        &[q.powi(-2 * nn), R::zero()],
        q2,
        q2,
        n.min(x) as usize,
    )?;
    Ok(c * poly)
}

/// ASEP weight `w(n; N; q)`.
pub fn w_site<R: Real>(n: u32, nmax: u32, q: R) -> R {
    q.powi(n as i32 * (n as i32 - nmax as i32)) * q_binomial(nmax, n, q * q)
}

/// `w(eta; N; q)` including `q^{u}`.
pub fn w_multi<R: Real>(e: &[u32], caps: &[u32], q: R) -> R {
    e.iter().zip(caps).fold(q.powi(u_sum(e, caps) as i32), |r, (&x, &c)| r * w_site(x, c, q))
}

/// Dynamic single-site weight `W(x; N, rho; q)` with `qh = q^rho`.
pub fn big_w_site<R: Real>(x: u32, nmax: u32, qh: R, q: R) -> Result<R> {
    let (xi, nn) = (x as i32, nmax as i32);
    let q2 = q * q;
    let c = qh * qh;
    let what = "site weight";
    let den = R::one() + c * q.powi(-2 * nn);
    pole(den, c * q.powi(-2 * nn), what)?;
    let num = R::one() + c * q.powi(4 * xi - 2 * nn);
    let r = num / den
        * poch(-c * q.powi(-2 * nn), q2, x)
        * poch_inv(-c * q2, q2, x, what)?
        * q.powi(-xi * (1 + xi - 2 * nn))
        * c.powi(-xi)
        * poch_inv(-R::one() / c, q2, nmax, what)?
        * q_binomial(nmax, x, q2);
    Ok(r)
}

/// `W_R(eta)` with `qr = q^rho`.
pub fn w_r<R: Real>(e: &[u32], caps: &[u32], qr: R, q: R) -> Result<R> {
    (0..e.len())
        .try_fold(R::one(), |r, k| Ok(r * big_w_site(e[k], caps[k], qr * q.powi(tail_sum(e, caps, k + 2) as i32), q)?))
}

/// `W_L(eta)` with `ql = q^lambda`, built from base `1/q` site weights.
pub fn w_l<R: Real>(e: &[u32], caps: &[u32], ql: R, q: R) -> Result<R> {
    (0..e.len()).try_fold(R::one(), |r, k| {
        let qh = R::one() / (ql * q.powi(head_sum(e, caps, k) as i32));
        Ok(r * big_w_site(e[k], caps[k], qh, R::one() / q)?)
    })
}

/// `K_R(eta, xi)`.
pub fn k_r<R: Real>(eta: &[u32], xi: &[u32], caps: &[u32], qr: R, q: R) -> Result<R> {
    (0..caps.len()).try_fold(half_pow(q, -u_sum(eta, caps)), |acc, k| {
        Ok(acc * k_site(eta[k], xi[k], qr * q.powi(tail_sum(xi, caps, k + 2) as i32), caps[k], q)?)
    })
}

/// `K_L(eta, zeta)`.
pub fn k_l<R: Real>(eta: &[u32], zeta: &[u32], caps: &[u32], ql: R, q: R) -> Result<R> {
    (0..caps.len()).try_fold(half_pow(q, -u_sum(eta, caps)), |acc, k| {
        let qh = R::one() / (ql * q.powi(head_sum(zeta, caps, k) as i32));
        Ok(acc * k_site(eta[k], zeta[k], qh, caps[k], R::one() / q)?)
    })
}

fn hahn_poly<R: Real>(n: u32, x: u32, alpha: R, beta: R, nmax: u32, q: R) -> Result<R> {
    let q2 = q * q;
    hyp(
        &[q2.powi(-(x as i32)), alpha * beta * q2.powi(x as i32 + 1), q2.powi(-(n as i32))],
        &[alpha * q2, q2.powi(-(nmax as i32))],
        q2,
        q2,
        n.min(x) as usize,
    )
}

/// One-site q-Hahn function `p(n, x)`.
pub fn p_site<R: Real>(n: u32, x: u32, ql: R, qr: R, v: R, nmax: u32, q: R) -> Result<R> {
    let (ni, xi, nn) = (n as i32, x as i32, nmax as i32);
    let q2 = q * q;
    let qa = qr * ql * q.powi(-nn);
    let lr = ql / qr;
    let acc = v.powi(ni)
        * poch(-v * qa * q, q2, x)
        * poch(v * lr * q.powi(2 * ni - nn + 1), q2, nmax)
        * q.powi(-ni * ni)
        * qa.powi(-ni)
        * poch_inv(v * lr * q.powi(-2 * xi + nn + 1), q2, x + n, "p coefficient").map_err(|e| match e {
            Error::PoleHit(s) => Error::DegenerateParameter(s),
            other => other,
        })?;
    let alpha = -v * qa / q;
    let beta = q.powi(-nn - 1) / (lr * v);
    Ok(acc * hahn_poly(n, x, alpha, beta, nmax, q)?)
}

/// One-site quantum q-Krawtchouk function.
pub fn k_qtm_site<R: Real>(n: u32, x: u32, ql: R, qr: R, v: R, nmax: u32, q: R) -> Result<R> {
    let q2 = q * q;
    let p = qr / (ql * v) * q.powi(-(nmax as i32) - 1);
    hyp(
        &[q2.powi(-(x as i32)), q2.powi(-(n as i32))],
        &[q2.powi(-(nmax as i32))],
        q2,
        p * q2.powi(x as i32 + 1),
        n.min(x) as usize,
    )
}

/// One-site affine q-Krawtchouk function.
pub fn k_aff_site<R: Real>(n: u32, x: u32, ql: R, qr: R, v: R, nmax: u32, q: R) -> Result<R> {
    let (ni, nn) = (n as i32, nmax as i32);
    let q2 = q * q;
    let qa = qr * ql * q.powi(-nn);
    let acc = (-v).powi(ni) * poch(v * qa * q, q2, x) * q.powi(-ni * ni) * qa.powi(-ni);
    let p = v * qa / q;
    let poly =
        hyp(&[q2.powi(-(x as i32)), R::zero(), q2.powi(-ni)], &[p * q2, q2.powi(-nn)], q2, q2, n.min(x) as usize)?;
    Ok(acc * poly)
}

type SiteFn<R> = fn(u32, u32, R, R, R, u32, R) -> Result<R>;

fn hahn_type<R: Real>(f: SiteFn<R>, eta: &[u32], xi: &[u32], caps: &[u32], qr: R, v: R, q: R) -> Result<R> {
    (0..caps.len()).try_fold(R::one(), |acc, k| {
        let a = q.powi(head_sum(eta, caps, k) as i32);
        let b = qr * q.powi(tail_sum(xi, caps, k + 2) as i32);
        Ok(acc * f(eta[k], xi[k], a, b, v, caps[k], q)?)
    })
}

pub fn p_r<R: Real>(eta: &[u32], xi: &[u32], caps: &[u32], qr: R, v: R, q: R) -> Result<R> {
    hahn_type(p_site::<R>, eta, xi, caps, qr, v, q)
}

pub fn k_qtm<R: Real>(eta: &[u32], xi: &[u32], caps: &[u32], v: R, q: R) -> Result<R> {
    hahn_type(k_qtm_site::<R>, eta, xi, caps, R::one(), v, q)
}

pub fn k_aff<R: Real>(eta: &[u32], xi: &[u32], caps: &[u32], v: R, q: R) -> Result<R> {
    hahn_type(k_aff_site::<R>, eta, xi, caps, R::one(), v, q)
}

/// Prefactors of the degenerate orthogonality relations at total `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Omega {
    P,
    PR,
    Qtm,
    QtmR,
    Aff,
    AffR,
}

pub fn omega<R: Real>(kind: Omega, x: u32, qr: R, v: R, total_n: u32, q: R) -> Result<R> {
    let (xi, ni) = (x as i32, total_n as i32);
    let q2 = q * q;
    let what = "omega";
    Ok(match kind {
        Omega::P => {
            v.powi(-2 * xi)
                * q.powi(xi * (2 * xi - 1))
                * poch(-v * qr * q.powi(1 - ni), q2, x)
                * poch_inv(v / qr * q.powi(2 * xi - ni + 1), q2, total_n - x, what)?
        }
        Omega::PR => poch(v / qr * q.powi(ni + 1 - 2 * xi), q2, x) * poch_inv(-v * qr * q.powi(1 - ni), q2, x, what)?,
        Omega::Qtm => v.powi(xi) * q.powi(xi * (xi + ni - 1)) * poch(v * q.powi(2 * xi - ni + 1), q2, total_n - x),
        Omega::QtmR => v.powi(xi) * q.powi(xi * (ni - xi + 1)) * poch_inv(v * q.powi(1 + ni - 2 * xi), q2, x, what)?,
        Omega::Aff => v.powi(ni - 3 * xi) * q.powi(xi * (ni + xi - 1)) * poch(v * q.powi(1 - ni), q2, x),
        Omega::AffR => {
            v.powi(-xi) * q.powi(ni * (1 - ni) + xi * (ni - xi - 1)) * poch_inv(v * q.powi(1 - ni), q2, x, what)?
        }
    })
}

/// Gram deviation in both directions, as in the double-precision check.
pub fn biorthogonality<R: Real>(dp: &[Vec<R>], dm: &[Vec<R>], mu: &[R], nu: &[R]) -> f64 {
    let n = mu.len();
    let one_side = |at: &dyn Fn(&[Vec<R>], usize, usize) -> R, mu: &[R], nu: &[R]| {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let g = (0..n).fold(R::zero(), |s, a| s + at(dp, a, i) * at(dm, a, j) * mu[a]);
                let target = if i == j { nu[i].signum() } else { R::zero() };
                worst = worst.max((g * (nu[i] * nu[j]).abs().sqrt() - target).abs().to_f64());
            }
        }
        worst
    };
    let fwd = one_side(&|m: &[Vec<R>], a, i| m[a][i], mu, nu);
    let bwd = one_side(&|m: &[Vec<R>], a, i| m[i][a], nu, mu);
    fwd.max(bwd)
}

/// Orthogonality cases with a precise implementation.
pub fn supports(case: OrthoCase) -> bool {
    matches!(case, OrthoCase::KR | OrthoCase::KL | OrthoCase::PvR | OrthoCase::KQtm | OrthoCase::KAff)
}

/// Gram deviation of `case` evaluated in the field `R`.
pub fn orthogonality_residual<R: Real>(
    case: OrthoCase,
    q: f64,
    rho: f64,
    lambda: f64,
    v: f64,
    caps: &[u32],
) -> Result<f64> {
    let s = enumerate(caps, None)?;
    let st = s.states();
    let nn: u32 = caps.iter().sum();
    let qq = R::of(q);
    let (qr, ql, vv) = (R::of(q.powf(rho)), R::of(q.powf(lambda)), R::of(v));
    let tot = |x: &[u32]| x.iter().sum::<u32>();
    let matrix = |f: &dyn Fn(&[u32], &[u32]) -> Result<R>| -> Result<Vec<Vec<R>>> {
        st.iter().map(|a| st.iter().map(|b| f(a, b)).collect()).collect()
    };
    let vector = |f: &dyn Fn(&[u32]) -> Result<R>| -> Result<Vec<R>> { st.iter().map(|x| f(x)).collect() };
    let w = vector(&|x| Ok(w_multi(x, caps, qq)))?;
    let (d, mu, nu) = match case {
        OrthoCase::KR => (matrix(&|a, b| k_r(a, b, caps, qr, qq))?, w, vector(&|x| w_r(x, caps, qr, qq))?),
        OrthoCase::KL => (matrix(&|a, b| k_l(a, b, caps, ql, qq))?, w, vector(&|x| w_l(x, caps, ql, qq))?),
        OrthoCase::PvR => (
            matrix(&|a, b| p_r(a, b, caps, qr, vv, qq))?,
            vector(&|x| Ok(w_multi(x, caps, qq) * omega(Omega::P, tot(x), qr, vv, nn, qq)?))?,
            vector(&|x| Ok(w_r(x, caps, qr, qq)? * omega(Omega::PR, tot(x), qr, vv, nn, qq)?))?,
        ),
        OrthoCase::KQtm => (
            matrix(&|a, b| k_qtm(a, b, caps, vv, qq))?,
            vector(&|x| Ok(w_multi(x, caps, qq) * omega(Omega::Qtm, tot(x), qr, vv, nn, qq)?))?,
            vector(&|x| Ok(w_multi(x, caps, qq) * omega(Omega::QtmR, tot(x), qr, vv, nn, qq)?))?,
        ),
        OrthoCase::KAff => (
            matrix(&|a, b| k_aff(a, b, caps, vv, qq))?,
            vector(&|x| Ok(w_multi(x, caps, qq) * omega(Omega::Aff, tot(x), qr, vv, nn, qq)?))?,
            vector(&|x| Ok(w_multi(x, caps, R::one() / qq) * omega(Omega::AffR, tot(x), qr, vv, nn, qq)?))?,
        ),
        other => return Err(Error::InvalidArgument(format!("no double-double implementation of {}", other.name()))),
    };
    Ok(biorthogonality(&d, &d, &mu, &nu))
}

/// Recurrence residual with `k` evaluated in `R`; the shifted boundaries
/// reuse `q^rho` so all three evaluations see the same parameter.
pub fn recurrence_residual<R: Real>(which: Recurrence, n: u32, x: u32, rho: f64, nmax: u32, q: f64) -> Result<f64> {
    let qq = R::of(q);
    let qh = R::of(q.powf(rho));
    let k = |xx: i64, shift: i32| -> Result<R> {
        if xx < 0 || xx > nmax as i64 {
            Ok(R::zero())
        } else {
            k_site(n, xx as u32, qh * qq.powi(shift), nmax, qq)
        }
    };
    let c = |kind: RecKind| -> Result<R> { Ok(R::of(recurrence_coeff(kind, x, rho, nmax, q)?)) };
    let xi = x as i64;
    let lhs = qq.powi(-2 * n as i32) * k(xi, 0)?;
    let terms = match which {
        Recurrence::ThreeTerm => {
            [c(RecKind::AMinus1)? * k(xi - 1, 0)?, c(RecKind::A0)? * k(xi, 0)?, c(RecKind::A1)? * k(xi + 1, 0)?]
        }
        Recurrence::RhoPlus2 => [
            c(RecKind::A0Plus2)? * k(xi, 2)?,
            c(RecKind::AMinus1Plus2)? * k(xi - 1, 2)?,
            c(RecKind::AMinus2Plus2)? * k(xi - 2, 2)?,
        ],
        Recurrence::RhoMinus2 => [
            c(RecKind::A0Minus2)? * k(xi, -2)?,
            c(RecKind::A1Minus2)? * k(xi + 1, -2)?,
            c(RecKind::A2Minus2)? * k(xi + 2, -2)?,
        ],
    };
    let scale = terms.iter().fold(lhs.abs().to_f64(), |m, t| m.max(t.abs().to_f64())).max(1e-300);
    let sum = terms.iter().fold(R::zero(), |s, &t| s + t);
    Ok((lhs - sum).abs().to_f64() / scale)
}

/// `k(n, x; -rho) = (-1)^n k(n, N - x; rho)` in `R`.
pub fn reflection_residual<R: Real>(n_max: u32, rho: f64, q: f64) -> Result<f64> {
    let qq = R::of(q);
    let qh = R::of(q.powf(rho));
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        for x in 0..=n_max {
            let a = k_site(n, x, R::one() / qh, n_max, qq)?;
            let b = sign::<R>(n) * k_site(n, n_max - x, qh, n_max, qq)?;
            worst = worst.max((a - b).abs().to_f64() / a.abs().to_f64().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualities::{
        k_aff_product, k_qtm_product, k_r_product, orthogonality_residual as ortho64, p_product, DualityParams,
    };
    use crate::processes::{w_multi as w64, w_r_generic};
    use crate::qspecial::{k_one, omega as omega64, OmegaKind};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn f64_instantiation_matches_main_kernels() {
        let (q, rho, v): (f64, f64, f64) = (0.7, 0.35, 1.3);
        let caps = [2u32, 1, 2];
        let s = enumerate(&caps, None).unwrap();
        for a in s.states() {
            assert!(rel(w_multi::<f64>(a, &caps, q), w64(a, &caps, q)) < 1e-13);
            assert!(
                rel(w_r::<f64>(a, &caps, q.powf(rho), q).unwrap(), w_r_generic(a, &caps, q.powf(rho), q).unwrap())
                    < 1e-12
            );
            for b in s.states() {
                assert!(
                    rel(
                        k_r::<f64>(a, b, &caps, q.powf(rho), q).unwrap(),
                        k_r_product(a, b, &caps, q.powf(rho), q).unwrap()
                    ) < 1e-12
                );
                assert!(
                    rel(
                        p_r::<f64>(a, b, &caps, q.powf(rho), v, q).unwrap(),
                        p_product(a, b, &caps, q.powf(rho), v, q).unwrap()
                    ) < 1e-12
                );
                assert!(
                    rel(k_qtm::<f64>(a, b, &caps, v, q).unwrap(), k_qtm_product(a, b, &caps, v, q).unwrap()) < 1e-12
                );
                assert!(
                    rel(k_aff::<f64>(a, b, &caps, v, q).unwrap(), k_aff_product(a, b, &caps, v, q).unwrap()) < 1e-12
                );
            }
        }
        let kinds = [
            (Omega::P, OmegaKind::P),
            (Omega::PR, OmegaKind::PR),
            (Omega::Qtm, OmegaKind::Qtm),
            (Omega::QtmR, OmegaKind::QtmR),
            (Omega::Aff, OmegaKind::Aff),
            (Omega::AffR, OmegaKind::AffR),
        ];
        for (a, b) in kinds {
            for x in 0..=5 {
                let p = omega::<f64>(a, x, q.powf(rho), v, 5, q).unwrap();
                assert!(rel(p, omega64(b, x, rho, v, 5, q).unwrap()) < 1e-12, "{a:?} {x}");
            }
        }
        assert!(rel(k_site::<f64>(2, 3, q.powf(rho), 4, q).unwrap(), k_one(2, 3, rho, 4, q).unwrap()) < 1e-13);
    }

    #[test]
    fn double_double_agrees_with_double_where_well_conditioned() {
        let (q, rho): (f64, f64) = (0.8, 0.3);
        let a = k_site::<Dd>(2, 1, Dd::of(q.powf(rho)), 3, Dd::of(q)).unwrap().to_f64();
        assert!(rel(a, k_one(2, 1, rho, 3, q).unwrap()) < 1e-14);
        let p = DualityParams { q: 0.8, rho: 0.7, lambda: 0.0, v: 0.6, capacities: vec![1, 2] };
        for case in [OrthoCase::KR, OrthoCase::PvR, OrthoCase::KQtm, OrthoCase::KAff] {
            let dd = orthogonality_residual::<Dd>(case, p.q, p.rho, p.lambda, p.v, &p.capacities).unwrap();
            assert!(dd < 1e-20, "{case:?} {dd:e}");
            assert!(ortho64(case, &p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn double_double_resolves_cancellation() {
        // k at q = 0.4, rho = 2, N = 4 cancels by ~1e11 in its series
        let r64 = recurrence_residual::<f64>(Recurrence::ThreeTerm, 4, 4, 2.0, 4, 0.4).unwrap();
        let rdd = recurrence_residual::<Dd>(Recurrence::ThreeTerm, 4, 4, 2.0, 4, 0.4).unwrap();
        assert!(r64 > 1e-8 && rdd < 1e-12, "{r64:e} {rdd:e}");
        let o = orthogonality_residual::<Dd>(OrthoCase::KQtm, 0.5, 0.0, 0.0, 1.5, &[2, 2, 2]).unwrap();
        assert!(o < 1e-12, "{o:e}");
    }
}
