//! Scalar q-kernel: q-numbers, q-Pochhammer symbols, terminating basic and
//! classical hypergeometric series, one-site duality functions, site weights,
//! recurrence coefficients and the total-particle prefactors ω.
//!
//! Dynamic parameters enter the one-site functions only through powers of
//! `q^rho` (and `q^lambda`), so every generic routine takes those powers as a
//! [`Scalar`]. Real arithmetic covers the ordinary regime; evaluating at a
//! complex `q^rho` (for instance `i q^rho`) realizes the imaginary shift of
//! the boundary parameter without a separate code path.
//!
//! Coefficient products are accumulated in log-magnitude and phase form
//! ([`LogAcc`]) and exponentiated once.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};

/// Below this distance from 1 the classical branch is used.
pub const Q_ONE_EPS: f64 = 1e-12;

/// Relative size under which a denominator factor counts as zero.
const POLE_EPS: f64 = 1e-13;

/// Field operations needed by the kernel; implemented for `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + MulAssign
{
    fn real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn ipow(self, n: i32) -> Self;
    fn re_part(self) -> f64;
    fn im_part(self) -> f64;
    fn zero() -> Self {
        Self::real(0.0)
    }
    fn one() -> Self {
        Self::real(1.0)
    }
}

impl Scalar for f64 {
    fn real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn ipow(self, n: i32) -> Self {
        self.powi(n)
    }
    fn re_part(self) -> f64 {
        self
    }
    fn im_part(self) -> f64 {
        0.0
    }
}

impl Scalar for Complex64 {
    fn real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn ipow(self, n: i32) -> Self {
        self.powi(n)
    }
    fn re_part(self) -> f64 {
        self.re
    }
    fn im_part(self) -> f64 {
        self.im
    }
}

/// Product accumulated as `phase * exp(log_mag)`.
#[derive(Debug, Clone, Copy)]
pub struct LogAcc<T: Scalar> {
    log_mag: f64,
    phase: T,
    zero: bool,
}

impl<T: Scalar> Default for LogAcc<T> {
    fn default() -> Self {
        Self::one()
    }
}

impl<T: Scalar> LogAcc<T> {
    pub fn one() -> Self {
        LogAcc { log_mag: 0.0, phase: T::one(), zero: false }
    }

    pub fn mul(mut self, x: T) -> Self {
        let m = x.modulus();
        if m == 0.0 {
            self.zero = true;
        } else if !self.zero {
            self.log_mag += m.ln();
            self.phase *= x / T::real(m);
        }
        self
    }

    /// Multiplies by `x^n` for integer `n`.
    pub fn mul_pow(self, x: T, n: i32) -> Result<Self> {
        if n >= 0 {
            Ok((0..n).fold(self, |a, _| a.mul(x)))
        } else {
            (0..-n).try_fold(self, |a, _| a.div(x, "negative power of zero"))
        }
    }

    /// Multiplies by the positive real `exp(l)`.
    pub fn mul_exp(mut self, l: f64) -> Self {
        self.log_mag += l;
        self
    }

    pub fn div(mut self, x: T, what: &str) -> Result<Self> {
        let m = x.modulus();
        if m == 0.0 || !m.is_finite() {
            return Err(Error::PoleHit(what.to_string()));
        }
        if !self.zero {
            self.log_mag -= m.ln();
            self.phase = self.phase / (x / T::real(m));
        }
        Ok(self)
    }

    /// `(a; base)_n` in the numerator.
    pub fn poch(self, a: T, base: f64, n: u32) -> Self {
        let mut acc = self;
        let mut qj = 1.0;
        for _ in 0..n {
            acc = acc.mul(T::one() - a * T::real(qj));
            qj *= base;
        }
        acc
    }

    /// `(a; base)_n` in the denominator; reports a pole on a vanishing factor.
    pub fn poch_inv(self, a: T, base: f64, n: u32, what: &str) -> Result<Self> {
        let mut acc = self;
        let mut qj = 1.0;
        for _ in 0..n {
            let aq = a * T::real(qj);
            let f = T::one() - aq;
            if f.modulus() <= POLE_EPS * aq.modulus().max(1.0) {
                return Err(Error::PoleHit(what.to_string()));
            }
            acc = acc.div(f, what)?;
            qj *= base;
        }
        Ok(acc)
    }

    pub fn value(&self) -> T {
        if self.zero {
            T::zero()
        } else {
            self.phase * T::real(self.log_mag.exp())
        }
    }
}

/// `[a]_q = (q^a - q^-a)/(q - q^-1)`, equal to `a` at `q = 1`.
pub fn q_bracket(a: f64, q: f64) -> f64 {
    if (q - 1.0).abs() < Q_ONE_EPS {
        return a;
    }
    (q.powf(a) - q.powf(-a)) / (q - 1.0 / q)
}

/// `(a; q)_n = prod_{j<n} (1 - a q^j)`.
pub fn q_pochhammer(a: f64, q: f64, n: u32) -> f64 {
    q_poch(a, q, n)
}

/// Generic `(a; q)_n`.
pub fn q_poch<T: Scalar>(a: T, q: f64, n: u32) -> T {
    let mut r = T::one();
    let mut qj = 1.0;
    for _ in 0..n {
        r *= T::one() - a * T::real(qj);
        qj *= q;
    }
    r
}

/// Gaussian binomial `(q;q)_n / ((q;q)_k (q;q)_{n-k})`, zero outside `0..=n`.
pub fn q_binomial(n: u32, k: i64, q: f64) -> f64 {
    if k < 0 || k > n as i64 {
        return 0.0;
    }
    let k = k as u32;
    if (q - 1.0).abs() < Q_ONE_EPS {
        return binomial(n, k);
    }
    // Multiplicative form avoids (q;q)_n underflow for large n.
    let mut r = 1.0;
    for j in 0..k {
        r *= (1.0 - q.powi((n - j) as i32)) / (1.0 - q.powi((j + 1) as i32));
    }
    r
}

/// Ordinary binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |r, j| r * (n - j) as f64 / (j + 1) as f64)
}

/// Rising factorial `(a)_n`.
pub fn rising(a: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |r, j| r * (a + j as f64))
}

/// Terminating `r phi s` with an explicit last index `terms`, including the
/// `((-1)^j q^{j(j-1)/2})^{1+s-r}` factor when `r != s + 1`.
pub fn basic_hyp_terms<T: Scalar>(num: &[T], den: &[T], q: f64, z: T, terms: usize) -> Result<T> {
    let excess = 1 + den.len() as i32 - num.len() as i32;
    let mut sum = T::one();
    let mut term = T::one();
    let mut qj = 1.0;
    for j in 1..=terms {
        for &a in num {
            term *= T::one() - a * T::real(qj);
        }
        for &b in den {
            let bq = b * T::real(qj);
            let f = T::one() - bq;
            if f.modulus() <= POLE_EPS * bq.modulus().max(1.0) {
                return Err(Error::DivergentTerm { term: j });
            }
            term = term / f;
        }
        qj *= q;
        let qq = 1.0 - qj;
        if qq.abs() <= POLE_EPS {
            return Err(Error::DivergentTerm { term: j });
        }
        term = term * z / T::real(qq);
        if excess != 0 {
            // qj is now q^j; the step factor is (-q^{j-1})^excess
            term *= T::real((-qj / q).powi(excess));
        }
        sum += term;
    }
    Ok(sum)
}

/// Smallest `N >= 0` with `a = q^-N`, if any.
fn terminating_index(a: f64, q: f64) -> Option<usize> {
    if a <= 0.0 || (q - 1.0).abs() < Q_ONE_EPS {
        return None;
    }
    let n = -a.ln() / q.ln();
    let r = n.round();
    if r >= 0.0 && (n - r).abs() <= 1e-9 * r.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

/// Terminating basic hypergeometric series; the length is read off the
/// numerator parameters of the form `q^-N`.
pub fn basic_hyp(num: &[f64], den: &[f64], q: f64, z: f64) -> Result<f64> {
    let n = num.iter().filter_map(|&a| terminating_index(a, q)).min().ok_or(Error::NonTerminating)?;
    basic_hyp_terms(num, den, q, z, n)
}

/// Terminating classical `r+1 F r` with an explicit last index.
pub fn hyp_f_terms(num: &[f64], den: &[f64], z: f64, terms: usize) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    for j in 1..=terms {
        let jm = (j - 1) as f64;
        for &a in num {
            term *= a + jm;
        }
        for &b in den {
            let f = b + jm;
            if f.abs() <= POLE_EPS * b.abs().max(1.0) {
                return Err(Error::DivergentTerm { term: j });
            }
            term /= f;
        }
        term *= z / j as f64;
        sum += term;
    }
    Ok(sum)
}

/// Terminating classical hypergeometric series; some numerator parameter
/// must be a nonpositive integer.
pub fn hyp_f(num: &[f64], den: &[f64], z: f64) -> Result<f64> {
    let n = num
        .iter()
        .filter_map(|&a| {
            let r = a.round();
            (r <= 0.0 && (a - r).abs() <= 1e-12).then_some((-r) as usize)
        })
        .min()
        .ok_or(Error::NonTerminating)?;
    hyp_f_terms(num, den, z, n)
}

/// Orthogonal polynomial families evaluated by their terminating series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyFamily {
    /// `R_n(x; alpha, beta, gamma, delta; q)`, a 4phi3 in base `q`.
    QRacah { alpha: f64, beta: f64, gamma: f64, delta: f64, q: f64 },
    /// `P_n(x; alpha, beta, N; q)`, a 3phi2.
    QHahn { alpha: f64, beta: f64, n_max: u32, q: f64 },
    /// Dual q-Krawtchouk `K_n(x; c, N; q)`.
    QKrawtchouk { c: f64, n_max: u32, q: f64 },
    /// Quantum q-Krawtchouk `K^qtm_n(x; p, N; q)`.
    QuantumQKrawtchouk { p: f64, n_max: u32, q: f64 },
    /// Affine q-Krawtchouk `K^aff_n(x; p, N; q)`.
    AffineQKrawtchouk { p: f64, n_max: u32, q: f64 },
    /// Racah polynomial as a 4F3 at unit argument.
    Racah { alpha: f64, beta: f64, gamma: f64, delta: f64 },
    /// Hahn polynomial as a 3F2 at unit argument.
    Hahn { alpha: f64, beta: f64, n_max: u32 },
    /// Krawtchouk polynomial `2F1(-n, -x; -N; 1/p)`.
    Krawtchouk { p: f64, n_max: u32 },
}

/// Evaluates a family member of degree `n` at the integer point `x`.
pub fn poly_eval(family: PolyFamily, n: u32, x: u32) -> Result<f64> {
    let t = n.min(x) as usize;
    let (ni, xi) = (n as i32, x as i32);
    match family {
        PolyFamily::QRacah { alpha, beta, gamma, delta, q } => basic_hyp_terms(
            &[q.powi(-ni), alpha * beta * q.powi(ni + 1), q.powi(-xi), gamma * delta * q.powi(xi + 1)],
            &[alpha * q, beta * delta * q, gamma * q],
            q,
            q,
            t,
        ),
        PolyFamily::QHahn { alpha, beta, n_max, q } => basic_hyp_terms(
            &[q.powi(-ni), alpha * beta * q.powi(ni + 1), q.powi(-xi)],
            &[alpha * q, q.powi(-(n_max as i32))],
            q,
            q,
            t,
        ),
        PolyFamily::QKrawtchouk { c, n_max, q } => basic_hyp_terms(
            &[q.powi(-ni), q.powi(-xi), -c * q.powi(xi - n_max as i32)],
            &[q.powi(-(n_max as i32)), 0.0],
            q,
            q,
            t,
        ),
        PolyFamily::QuantumQKrawtchouk { p, n_max, q } => {
            basic_hyp_terms(&[q.powi(-ni), q.powi(-xi)], &[q.powi(-(n_max as i32))], q, p * q.powi(ni + 1), t)
        }
        PolyFamily::AffineQKrawtchouk { p, n_max, q } => {
            basic_hyp_terms(&[q.powi(-ni), 0.0, q.powi(-xi)], &[p * q, q.powi(-(n_max as i32))], q, q, t)
        }
        PolyFamily::Racah { alpha, beta, gamma, delta } => hyp_f_terms(
            &[-(n as f64), n as f64 + alpha + beta + 1.0, -(x as f64), x as f64 + gamma + delta + 1.0],
            &[alpha + 1.0, beta + delta + 1.0, gamma + 1.0],
            1.0,
            t,
        ),
        PolyFamily::Hahn { alpha, beta, n_max } => hyp_f_terms(
            &[-(n as f64), n as f64 + alpha + beta + 1.0, -(x as f64)],
            &[alpha + 1.0, -(n_max as f64)],
            1.0,
            t,
        ),
        PolyFamily::Krawtchouk { p, n_max } => hyp_f_terms(&[-(n as f64), -(x as f64)], &[-(n_max as f64)], 1.0 / p, t),
    }
}

fn qp(q: f64, e: i32) -> f64 {
    q.powi(e)
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::PoleHit(s) => Error::DegenerateParameter(s),
        other => other,
    }
}

/// One-site dual q-Krawtchouk duality function `k(n, x; rho, N; q)`;
/// `qh` is `q^rho`.
pub fn k_site<T: Scalar>(n: u32, x: u32, qh: T, nmax: u32, q: f64) -> Result<T> {
    let (ni, xi, nn) = (n as i32, x as i32, nmax as i32);
    let q2 = q * q;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let c = LogAcc::<T>::one()
        .mul(T::real(sign))
        .mul_pow(qh, -ni)?
        .mul_exp(0.5 * (n as f64) * (nmax as f64 - 1.0) * q.ln())
        .value();
    let poly = basic_hyp_terms(
        &[T::real(qp(q, -2 * ni)), T::real(qp(q, -2 * xi)), -(qh * qh) * T::real(qp(q, 2 * xi - 2 * nn))],
        &[T::real(qp(q, -2 * nn)), T::zero()],
        q2,
        T::real(q2),
        n.min(x) as usize,
    )?;
    Ok(c * poly)
}

/// Real convenience wrapper for [`k_site`].
pub fn k_one(n: u32, x: u32, rho: f64, nmax: u32, q: f64) -> Result<f64> {
    k_site(n, x, q.powf(rho), nmax, q)
}

/// ASEP single-site weight `w(n; N; q) = q^{n(n-N)} [N choose n]_{q^2}`.
pub fn w_site(n: u32, nmax: u32, q: f64) -> f64 {
    q.powi(n as i32 * (n as i32 - nmax as i32)) * q_binomial(nmax, n as i64, q * q)
}

/// Dynamic single-site weight `W(x; N, rho; q)`; `qh` is `q^rho`, and only
/// `q^{2 rho}` enters.
pub fn big_w_site<T: Scalar>(x: u32, nmax: u32, qh: T, q: f64) -> Result<T> {
    let (xi, nn) = (x as i32, nmax as i32);
    let q2 = q * q;
    let c = qh * qh;
    let what = "site weight";
    let num = T::one() + c * T::real(qp(q, 4 * xi - 2 * nn));
    let den = T::one() + c * T::real(qp(q, -2 * nn));
    let acc = LogAcc::<T>::one()
        .mul(num)
        .div(den, what)?
        .poch(-c * T::real(qp(q, -2 * nn)), q2, x)
        .poch_inv(-c * T::real(q2), q2, x, what)?
        .mul_exp(-(x as f64) * (1.0 + x as f64 - 2.0 * nmax as f64) * q.ln())
        .mul_pow(c, -xi)?;
    let inv_c = T::one() / c;
    let acc = acc.poch_inv(-inv_c, q2, nmax, what)?.mul(T::real(q_binomial(nmax, x as i64, q2)));
    Ok(acc.value())
}

/// Real convenience wrapper for [`big_w_site`].
pub fn big_w_one(x: u32, nmax: u32, rho: f64, q: f64) -> Result<f64> {
    big_w_site(x, nmax, q.powf(rho), q)
}

/// `q <-> 1/q` invariant variant of `W`.
pub fn w_inv_one(x: u32, nmax: u32, rho: f64, q: f64) -> Result<f64> {
    let (x, n) = (x as f64, nmax as f64);
    let e = 2.0 * x * (x + rho - n) + 0.5 * n * (n - 2.0 * rho - 1.0);
    Ok(q.powf(e) * big_w_one(x as u32, nmax, rho, q)?)
}

/// Symmetric single-site weight `W_hat(x; N, rho)`.
pub fn w_hat_one(x: u32, nmax: u32, rho: f64) -> Result<f64> {
    let n = nmax as f64;
    let d1 = rho - n;
    let d2 = rising(rho + 1.0, x);
    let d3 = rising(-rho, nmax);
    if d1 == 0.0 || d2 == 0.0 || d3 == 0.0 {
        return Err(Error::PoleHit(format!("W_hat at rho = {rho}")));
    }
    Ok((2.0 * x as f64 + rho - n) / d1 * rising(rho - n, x) / (d2 * d3) * binomial(nmax, x))
}

/// Which one-site weight [`site_weight`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    W,
    BigW,
    WInv,
    WHat,
}

/// Single-site weights by kind; `w` ignores `rho`.
pub fn site_weight(kind: WeightKind, x: u32, nmax: u32, rho: f64, q: f64) -> Result<f64> {
    if x > nmax {
        return Err(Error::IndexOutOfRange { index: x as usize, max: nmax as usize });
    }
    match kind {
        WeightKind::W => Ok(w_site(x, nmax, q)),
        WeightKind::BigW => big_w_one(x, nmax, rho, q),
        WeightKind::WInv => w_inv_one(x, nmax, rho, q),
        WeightKind::WHat => w_hat_one(x, nmax, rho),
    }
}

/// One-site q-Racah duality function `r(y, x)`; `ql = q^lambda`, `qr = q^rho`.
pub fn r_site<T: Scalar>(y: u32, x: u32, ql: T, qr: T, v: T, nmax: u32, q: f64) -> Result<T> {
    let (yi, xi, nn) = (y as i32, x as i32, nmax as i32);
    let q2 = q * q;
    let qa = qr * ql * T::real(qp(q, -nn)); // q^{rho+lambda-N}
    let lr = ql / qr; // q^{lambda-rho}
    let what = "r coefficient";
    let acc = LogAcc::<T>::one()
        .mul_pow(v, yi)?
        .poch(-v * qa * T::real(q), q2, x)
        .poch(-qa * T::real(q) / v, q2, y)
        .poch(v * lr * T::real(qp(q, 2 * yi - nn + 1)), q2, nmax)
        .mul_exp(-((y * y) as f64) * q.ln())
        .mul_pow(qa, -yi)?
        .poch_inv(v * lr * T::real(qp(q, -2 * xi + nn + 1)), q2, x + y, what)
        .map_err(degenerate)?;
    let alpha = -qa / (v * T::real(q));
    let beta = v / lr * T::real(qp(q, -nn - 1));
    let gamma = T::real(qp(q, -2 * nn - 2));
    let delta = -(ql * ql);
    let poly = basic_hyp_terms(
        &[
            T::real(qp(q2, -xi)),
            alpha * beta * T::real(qp(q2, xi + 1)),
            T::real(qp(q2, -yi)),
            gamma * delta * T::real(qp(q2, yi + 1)),
        ],
        &[alpha * T::real(q2), beta * delta * T::real(q2), gamma * T::real(q2)],
        q2,
        T::real(q2),
        x.min(y) as usize,
    )?;
    Ok(acc.value() * poly)
}

fn hahn_poly<T: Scalar>(n: u32, x: u32, alpha: T, beta: T, nmax: u32, q: f64) -> Result<T> {
    let q2 = q * q;
    basic_hyp_terms(
        &[T::real(qp(q2, -(x as i32))), alpha * beta * T::real(qp(q2, x as i32 + 1)), T::real(qp(q2, -(n as i32)))],
        &[alpha * T::real(q2), T::real(qp(q2, -(nmax as i32)))],
        q2,
        T::real(q2),
        n.min(x) as usize,
    )
}

/// One-site q-Hahn duality function `p(n, x)`.
pub fn p_site<T: Scalar>(n: u32, x: u32, ql: T, qr: T, v: T, nmax: u32, q: f64) -> Result<T> {
    let (ni, xi, nn) = (n as i32, x as i32, nmax as i32);
    let q2 = q * q;
    let qa = qr * ql * T::real(qp(q, -nn));
    let lr = ql / qr;
    let acc = LogAcc::<T>::one()
        .mul_pow(v, ni)?
        .poch(-v * qa * T::real(q), q2, x)
        .poch(v * lr * T::real(qp(q, 2 * ni - nn + 1)), q2, nmax)
        .mul_exp(-((n * n) as f64) * q.ln())
        .mul_pow(qa, -ni)?
        .poch_inv(v * lr * T::real(qp(q, -2 * xi + nn + 1)), q2, x + n, "p coefficient")
        .map_err(degenerate)?;
    let alpha = -v * qa / T::real(q);
    let beta = T::real(qp(q, -nn - 1)) / (lr * v);
    Ok(acc.value() * hahn_poly(n, x, alpha, beta, nmax, q)?)
}

/// Alternative one-site q-Hahn function `p'(n, x)`.
pub fn p_prime_site<T: Scalar>(n: u32, x: u32, ql: T, qr: T, v: T, nmax: u32, q: f64) -> Result<T> {
    let (ni, nn) = (n as i32, nmax as i32);
    let q2 = q * q;
    let qa = qr * ql * T::real(qp(q, -nn));
    let lr = ql / qr;
    let acc = LogAcc::<T>::one().mul_pow(v, ni)?.mul_exp(-((n * n) as f64) * q.ln()).mul_pow(qa, -ni)?.poch(
        -v * qa * T::real(q),
        q2,
        n,
    );
    let alpha = -v * qa / T::real(q);
    let beta = T::real(qp(q, -nn - 1)) / (lr * v);
    Ok(acc.value() * hahn_poly(n, x, alpha, beta, nmax, q)?)
}

/// One-site quantum q-Krawtchouk function `k^qtm(n, x)`.
pub fn k_qtm_site<T: Scalar>(n: u32, x: u32, ql: T, qr: T, v: T, nmax: u32, q: f64) -> Result<T> {
    let q2 = q * q;
    let p = qr / (ql * v) * T::real(qp(q, -(nmax as i32) - 1));
    basic_hyp_terms(
        &[T::real(qp(q2, -(x as i32))), T::real(qp(q2, -(n as i32)))],
        &[T::real(qp(q2, -(nmax as i32)))],
        q2,
        p * T::real(qp(q2, x as i32 + 1)),
        n.min(x) as usize,
    )
}

/// One-site affine q-Krawtchouk function `k^aff(n, x)`.
pub fn k_aff_site<T: Scalar>(n: u32, x: u32, ql: T, qr: T, v: T, nmax: u32, q: f64) -> Result<T> {
    let (ni, nn) = (n as i32, nmax as i32);
    let q2 = q * q;
    let qa = qr * ql * T::real(qp(q, -nn));
    let acc = LogAcc::<T>::one()
        .mul_pow(-v, ni)?
        .poch(v * qa * T::real(q), q2, x)
        .mul_exp(-((n * n) as f64) * q.ln())
        .mul_pow(qa, -ni)?;
    let p = v * qa / T::real(q);
    let poly = basic_hyp_terms(
        &[T::real(qp(q2, -(x as i32))), T::zero(), T::real(qp(q2, -ni))],
        &[p * T::real(q2), T::real(qp(q2, -nn))],
        q2,
        T::real(q2),
        n.min(x) as usize,
    )?;
    Ok(acc.value() * poly)
}

/// Symmetric one-site Racah duality function `r_hat(y, x)`.
pub fn r_hat_site(y: u32, x: u32, lam: f64, rho: f64, v: f64, nmax: u32) -> Result<f64> {
    let n = nmax as f64;
    let den = rising(-(x as f64) + 0.5 * (lam - rho + n + v + 1.0), x + y);
    if den == 0.0 {
        return Err(Error::DegenerateParameter("r_hat coefficient".into()));
    }
    let c = rising(0.5 * (rho + lam - n + v + 1.0), x)
        * rising(0.5 * (rho + lam - n - v + 1.0), y)
        * rising(y as f64 + 0.5 * (lam - rho - n + v + 1.0), nmax)
        / den;
    let alpha = 0.5 * (rho + lam - n - v - 1.0);
    let beta = 0.5 * (rho - lam - n + v - 1.0);
    let (xf, yf) = (x as f64, y as f64);
    let f = hyp_f_terms(
        &[-xf, xf + alpha + beta + 1.0, -yf, yf - n + lam],
        &[alpha + 1.0, beta + lam + 1.0, -n],
        1.0,
        x.min(y) as usize,
    )?;
    Ok(c * f)
}

/// Symmetric one-site Hahn duality function `p_hat(n, x)`.
pub fn p_hat_site(nn: u32, x: u32, lam: f64, rho: f64, v: f64, nmax: u32) -> Result<f64> {
    let n = nmax as f64;
    let den = rising(-(x as f64) + 0.5 * (lam - rho + n + 1.0 + v), x + nn);
    if den == 0.0 {
        return Err(Error::DegenerateParameter("p_hat coefficient".into()));
    }
    let c =
        rising(0.5 * (rho + lam - n + v + 1.0), x) * rising(nn as f64 + 0.5 * (lam - rho - n + 1.0 + v), nmax) / den;
    let alpha = 0.5 * (rho + lam - n + v - 1.0);
    let beta = 0.5 * (rho - lam - n - v - 1.0);
    let xf = x as f64;
    let f = hyp_f_terms(&[-xf, xf + alpha + beta + 1.0, -(nn as f64)], &[alpha + 1.0, -n], 1.0, nn.min(x) as usize)?;
    Ok(c * f)
}

/// Symmetric one-site Krawtchouk duality function `k_hat(n, x)`.
pub fn k_hat_site(n: u32, x: u32, v: f64, nmax: u32) -> Result<f64> {
    let f = hyp_f_terms(&[-(n as f64), -(x as f64)], &[-(nmax as f64)], 1.0 + v, n.min(x) as usize)?;
    Ok(v.powf(-0.5 * n as f64) * f)
}

/// Names of the q-difference coefficients: `a_{j}` for the three-term
/// relation and `a_{j,s}` for the relations shifting `rho` by `s = +-2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecKind {
    AMinus1,
    A0,
    A1,
    AMinus2Plus2,
    AMinus1Plus2,
    A0Plus2,
    A0Minus2,
    A1Minus2,
    A2Minus2,
}

/// Coefficients of the q-difference equations satisfied by `k(n, x; rho)`.
pub fn recurrence_coeff(kind: RecKind, x: u32, rho: f64, nmax: u32, q: f64) -> Result<f64> {
    let (x, n) = (x as f64, nmax as f64);
    let p = |e: f64| q.powf(e);
    let den = |a: f64, b: f64| -> Result<f64> {
        let d = (1.0 + p(a)) * (1.0 + p(b));
        if d == 0.0 {
            Err(Error::PoleHit("recurrence coefficient".into()))
        } else {
            Ok(d)
        }
    };
    let am1 = || -> Result<f64> {
        Ok(-p(4.0 * x + 2.0 * rho - 4.0 * n - 2.0) * (1.0 - p(2.0 * x)) * (1.0 + p(2.0 * x + 2.0 * rho))
            / den(4.0 * x + 2.0 * rho - 2.0 * n - 2.0, 4.0 * x + 2.0 * rho - 2.0 * n)?)
    };
    let a1 = || -> Result<f64> {
        Ok((1.0 - p(2.0 * x - 2.0 * n)) * (1.0 + p(2.0 * x + 2.0 * rho - 2.0 * n))
            / den(4.0 * x + 2.0 * rho - 2.0 * n, 4.0 * x + 2.0 * rho - 2.0 * n + 2.0)?)
    };
    let s = 2.0 * rho + 4.0 * x - 2.0 * n;
    match kind {
        RecKind::AMinus1 => am1(),
        RecKind::A1 => a1(),
        RecKind::A0 => Ok(1.0 - am1()? - a1()?),
        RecKind::A0Plus2 => Ok((1.0 + p(2.0 * rho + 2.0 * x - 2.0 * n))
            * (1.0 + p(2.0 * rho + 2.0 * x - 2.0 * n + 2.0))
            / den(s, s + 2.0)?),
        RecKind::AMinus1Plus2 => {
            Ok((1.0 + p(-2.0)) * (1.0 - p(-2.0 * x)) * (1.0 + p(2.0 * rho + 2.0 * x - 2.0 * n))
                / den(-s - 2.0, s - 2.0)?)
        }
        RecKind::AMinus2Plus2 => Ok((1.0 - p(-2.0 * x)) * (1.0 - p(2.0 - 2.0 * x)) / den(-s, -s + 2.0)?),
        RecKind::A0Minus2 => {
            Ok((1.0 + p(-2.0 * rho - 2.0 * x)) * (1.0 + p(-2.0 * rho - 2.0 * x + 2.0)) / den(-s, -s + 2.0)?)
        }
        RecKind::A1Minus2 => {
            Ok((1.0 + p(-2.0)) * (1.0 - p(2.0 * x - 2.0 * n)) * (1.0 + p(-2.0 * rho - 2.0 * x))
                / den(s - 2.0, -s - 2.0)?)
        }
        RecKind::A2Minus2 => Ok((1.0 - p(2.0 * x - 2.0 * n)) * (1.0 - p(2.0 * x - 2.0 * n + 2.0)) / den(s, s + 2.0)?),
    }
}

/// Which relation [`recurrence_residual`] checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recurrence {
    ThreeTerm,
    RhoPlus2,
    RhoMinus2,
}

/// Residual of a q-difference equation for `k(n, ., rho)` at `(n, x)`,
/// relative to the largest term.
pub fn recurrence_residual(which: Recurrence, n: u32, x: u32, rho: f64, nmax: u32, q: f64) -> Result<f64> {
    let k = |xx: i64, r: f64| -> Result<f64> {
        if xx < 0 || xx > nmax as i64 {
            Ok(0.0)
        } else {
            k_one(n, xx as u32, r, nmax, q)
        }
    };
    let xi = x as i64;
    let lhs = q.powi(-2 * n as i32) * k(xi, rho)?;
    let terms: Vec<f64> = match which {
        Recurrence::ThreeTerm => vec![
            recurrence_coeff(RecKind::AMinus1, x, rho, nmax, q)? * k(xi - 1, rho)?,
            recurrence_coeff(RecKind::A0, x, rho, nmax, q)? * k(xi, rho)?,
            recurrence_coeff(RecKind::A1, x, rho, nmax, q)? * k(xi + 1, rho)?,
        ],
        Recurrence::RhoPlus2 => vec![
            recurrence_coeff(RecKind::A0Plus2, x, rho, nmax, q)? * k(xi, rho + 2.0)?,
            recurrence_coeff(RecKind::AMinus1Plus2, x, rho, nmax, q)? * k(xi - 1, rho + 2.0)?,
            recurrence_coeff(RecKind::AMinus2Plus2, x, rho, nmax, q)? * k(xi - 2, rho + 2.0)?,
        ],
        Recurrence::RhoMinus2 => vec![
            recurrence_coeff(RecKind::A0Minus2, x, rho, nmax, q)? * k(xi, rho - 2.0)?,
            recurrence_coeff(RecKind::A1Minus2, x, rho, nmax, q)? * k(xi + 1, rho - 2.0)?,
            recurrence_coeff(RecKind::A2Minus2, x, rho, nmax, q)? * k(xi + 2, rho - 2.0)?,
        ],
    };
    let scale = terms.iter().fold(lhs.abs(), |m, t| m.max(t.abs())).max(1e-300);
    Ok((lhs - terms.iter().sum::<f64>()).abs() / scale)
}

/// Prefactors ω multiplying the reversible measures in the degenerate
/// orthogonality relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaKind {
    P,
    PR,
    Qtm,
    QtmR,
    Aff,
    AffR,
    PHat,
    PRHat,
    KHat,
}

/// Evaluates ω of the given kind at total particle number `x`.
pub fn omega(kind: OmegaKind, x: u32, rho: f64, v: f64, total_n: u32, q: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::InvalidArgument("v must be nonzero".into()));
    }
    if x > total_n {
        return Err(Error::IndexOutOfRange { index: x as usize, max: total_n as usize });
    }
    let (xf, nf) = (x as f64, total_n as f64);
    let q2 = q * q;
    let what = "omega";
    let lq = q.ln();
    let acc = LogAcc::<f64>::one();
    let val = match kind {
        OmegaKind::P => acc
            .mul_pow(v, -2 * x as i32)?
            .mul_exp(xf * (2.0 * xf - 1.0) * lq)
            .poch(-v * q.powf(rho - nf + 1.0), q2, x)
            .poch_inv(v * q.powf(-rho + 2.0 * xf - nf + 1.0), q2, total_n - x, what)?
            .value(),
        OmegaKind::PR => acc
            .poch(v * q.powf(-rho - 2.0 * xf + nf + 1.0), q2, x)
            .poch_inv(-v * q.powf(rho - nf + 1.0), q2, x, what)?
            .value(),
        OmegaKind::Qtm => acc
            .mul_pow(v, x as i32)?
            .mul_exp(xf * (xf + nf - 1.0) * lq)
            .poch(v * q.powf(2.0 * xf - nf + 1.0), q2, total_n - x)
            .value(),
        OmegaKind::QtmR => acc
            .mul_pow(v, x as i32)?
            .mul_exp(xf * (nf - xf + 1.0) * lq)
            .poch_inv(v * q.powf(1.0 + nf - 2.0 * xf), q2, x, what)?
            .value(),
        OmegaKind::Aff => acc
            .mul_pow(v, total_n as i32 - 3 * x as i32)?
            .mul_exp(xf * (nf + xf - 1.0) * lq)
            .poch(v * q.powf(1.0 - nf), q2, x)
            .value(),
        OmegaKind::AffR => acc
            .mul_pow(v, -(x as i32))?
            .mul_exp((nf * (1.0 - nf) + xf * (nf - xf - 1.0)) * lq)
            .poch_inv(v * q.powf(1.0 - nf), q2, x, what)?
            .value(),
        OmegaKind::PHat => {
            let d = rising(xf + 0.5 * (v - rho - nf + 1.0), total_n - x);
            if d == 0.0 {
                return Err(Error::PoleHit(what.into()));
            }
            sign_pow(x) * rising(0.5 * (rho - nf + v + 1.0), x) / d
        }
        OmegaKind::PRHat => {
            let d = rising(0.5 * (v + rho - nf + 1.0), x);
            if d == 0.0 {
                return Err(Error::PoleHit(what.into()));
            }
            sign_pow(x) * rising(-xf + 0.5 * (v - rho + nf + 1.0), x) / d
        }
        OmegaKind::KHat => v.powi(-(x as i32)) / (1.0 + 1.0 / v).powi(total_n as i32),
    };
    Ok(val)
}

/// `(-1)^n`.
pub fn sign_pow(n: u32) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_examples() {
        assert!((q_bracket(1.0, 0.37) - 1.0).abs() < 1e-14);
        assert_eq!(q_bracket(3.7, 1.0), 3.7);
        assert!((q_bracket(2.0, 2.0) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(q_pochhammer(0.9, 0.5, 0), 1.0);
        assert_eq!(q_pochhammer(1.0, 0.5, 3), 0.0);
        assert!((q_pochhammer(0.5, 0.5, 2) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn binomial_examples() {
        assert!((q_binomial(5, 0, 0.7) - 1.0).abs() < 1e-15);
        assert_eq!(q_binomial(4, 2, 1.0), 6.0);
        assert!((q_binomial(2, 1, 0.5) - 1.5).abs() < 1e-15);
        assert_eq!(q_binomial(3, 4, 0.5), 0.0);
        assert_eq!(q_binomial(3, -1, 0.5), 0.0);
    }

    #[test]
    fn series_examples() {
        let q: f64 = 0.5;
        assert_eq!(basic_hyp(&[1.0, 0.3], &[0.2], q, 0.7).unwrap(), 1.0);
        let v = basic_hyp(&[q.powi(-2), q.powi(-2)], &[], q * q, q.powi(4)).unwrap();
        assert!((v - 0.25).abs() < 1e-14, "{v}");
        // 1 + z (1 - q^-1) / (1 - q) with z = q = 0.5
        let v = basic_hyp(&[1.0 / q], &[], q, 0.5).unwrap();
        assert!(v.abs() < 1e-14, "{v}");
        assert_eq!(basic_hyp(&[0.3], &[0.2], q, 0.5), Err(Error::NonTerminating));
        assert!(matches!(basic_hyp(&[q.powi(-3)], &[q.powi(-1)], q, 0.5), Err(Error::DivergentTerm { .. })));
        assert!((hyp_f(&[-2.0, 1.0], &[1.0], 1.0).unwrap() - (1.0 - 2.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn krawtchouk_two_term() {
        let (q, rho): (f64, f64) = (0.5, 0.3);
        let q2 = q * q;
        let c = q.powf(2.0 * rho);
        let by_hand =
            1.0 + (1.0 - 1.0 / q2) * (1.0 - 1.0 / q2) * (1.0 + c * q2 / q2) / ((1.0 - 1.0 / q2) * (1.0 - q2)) * q2;
        let v = poly_eval(PolyFamily::QKrawtchouk { c, n_max: 1, q: q2 }, 1, 1).unwrap();
        assert!((v - by_hand).abs() < 1e-12);
        for f in [
            PolyFamily::QRacah { alpha: 0.3, beta: 0.4, gamma: 0.2, delta: 0.7, q: 0.6 },
            PolyFamily::Hahn { alpha: 0.3, beta: 0.2, n_max: 3 },
        ] {
            assert_eq!(poly_eval(f, 0, 2).unwrap(), 1.0);
            assert_eq!(poly_eval(f, 2, 0).unwrap(), 1.0);
        }
    }

    #[test]
    fn k_degree_zero_is_one() {
        for x in 0..=3 {
            assert!((k_one(0, x, 0.4, 3, 0.7).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(k_qtm_site(0, x, 1.0, 0.8, 1.3, 3, 0.7).unwrap(), 1.0);
        }
    }

    #[test]
    fn racah_equals_krawtchouk_sum() {
        let (lam, rho, v, n, q): (f64, f64, f64, u32, f64) = (0.2, -0.4, 1.3, 2, 0.6);
        let direct = r_site(1, 1, q.powf(lam), q.powf(rho), v, n, q).unwrap();
        let sum: f64 = (0..=n)
            .map(|m| {
                (-v).powi(m as i32)
                    * k_one(m, 1, lam, n, 1.0 / q).unwrap()
                    * k_one(m, 1, rho, n, q).unwrap()
                    * w_site(m, n, q)
            })
            .sum();
        assert!((direct - sum).abs() < 1e-12 * sum.abs().max(1.0));
    }

    #[test]
    fn weights_examples() {
        assert_eq!(w_site(0, 3, 0.7), 1.0);
        let s: f64 = (0..=3).map(|x| big_w_one(x, 3, 0.3, 0.6).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-13);
        let a = w_inv_one(1, 2, 0.3, 0.6).unwrap();
        let b = w_inv_one(1, 2, 0.3, 1.0 / 0.6).unwrap();
        assert!((a - b).abs() < 1e-13 * a.abs());
        assert!(matches!(w_hat_one(1, 2, 2.0), Err(Error::PoleHit(_))));
    }

    #[test]
    fn recurrence_examples() {
        assert_eq!(recurrence_coeff(RecKind::AMinus1, 0, 0.4, 2, 0.7).unwrap(), 0.0);
        let r = recurrence_residual(Recurrence::ThreeTerm, 1, 1, 0.4, 2, 0.7).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(OmegaKind::QtmR, 0, 0.0, 1.3, 3, 0.6).unwrap(), 1.0);
        assert!((omega(OmegaKind::KHat, 0, 0.0, 1.0, 3, 1.0).unwrap() - 0.125).abs() < 1e-15);
        let p = omega(OmegaKind::P, 2, 0.3, 0.8, 4, 0.6).unwrap() * omega(OmegaKind::PR, 2, 0.3, 0.8, 4, 0.6).unwrap();
        assert!(p.is_finite() && p != 0.0);
    }

    #[test]
    fn log_acc_matches_direct_product() {
        let a = LogAcc::<f64>::one().mul(-2.0).mul(0.25).div(-4.0, "t").unwrap().value();
        assert!((a - 0.125).abs() < 1e-16);
        assert_eq!(LogAcc::<f64>::one().mul(0.0).mul(3.0).value(), 0.0);
        assert!(LogAcc::<f64>::one().div(0.0, "t").is_err());
    }
}
