//! Dense matrix realization of `U_q(sl_2)` on the site spaces
//! `{0, ..., N_k}`: generators, Casimir, coproduct and the twisted
//! primitive elements, with residual checks tying them to the generators of
//! the exclusion processes.
//!
//! Operators act on functions `f(n)`; two-site spaces are indexed by
//! `n1 (N2 + 1) + n2`, and longer chains lexicographically with the first
//! site most significant.

use crate::dualities::k_r_product;
use crate::error::{Error, Result};
use crate::lattice::enumerate;
use crate::processes::{build_generator, w_multi, ProcessKind, ProcessSpec};
use crate::qspecial::{k_site, q_bracket, sign_pow, w_site};
use nalgebra::DMatrix;

/// Images of `K`, `K^{-1}`, `E`, `F` under the site representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RepMatrices {
    pub site: usize,
    pub capacity: u32,
    pub q: f64,
    pub k: DMatrix<f64>,
    pub k_inv: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

/// Images of the coproducts of the generators on two adjacent sites.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteOperator {
    pub dims: (usize, usize),
    pub q: f64,
    pub k: DMatrix<f64>,
    pub k_inv: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

/// `u_k = -N_k / 2 + N_1 + ... + N_k` (1-based `k`).
pub fn u_k(capacities: &[u32], k: usize) -> f64 {
    let prefix: u32 = capacities[..k].iter().sum();
    prefix as f64 - 0.5 * capacities[k - 1] as f64
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() || q == 1.0 {
        return Err(Error::InvalidArgument(format!("q must be positive and different from 1, got {q}")));
    }
    Ok(())
}

/// Representation on site `k` (1-based).
pub fn rep_matrices(k: usize, capacities: &[u32], q: f64) -> Result<RepMatrices> {
    check_q(q)?;
    if k == 0 || k > capacities.len() {
        return Err(Error::IndexOutOfRange { index: k, max: capacities.len() });
    }
    let n = capacities[k - 1];
    let d = n as usize + 1;
    let tw = q.powf(u_k(capacities, k));
    let half = 0.5 * n as f64;
    let kmat = DMatrix::from_fn(d, d, |i, j| if i == j { q.powf(i as f64 - half) } else { 0.0 });
    let kinv = DMatrix::from_fn(d, d, |i, j| if i == j { q.powf(half - i as f64) } else { 0.0 });
    let e = DMatrix::from_fn(d, d, |i, j| if i >= 1 && j == i - 1 { tw * q_bracket(i as f64, q) } else { 0.0 });
    let f = DMatrix::from_fn(d, d, |i, j| if j == i + 1 { q_bracket((n as usize - i) as f64, q) / tw } else { 0.0 });
    Ok(RepMatrices { site: k, capacity: n, q, k: kmat, k_inv: kinv, e, f })
}

fn identity_like(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(m.nrows(), m.ncols())
}

fn max_norm(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// Largest residual among the four defining relations, each scaled by the
/// norms of its products (floored at 1).
pub fn relation_residual(r: &RepMatrices) -> f64 {
    let q = r.q;
    let id = identity_like(&r.k);
    let k2 = &r.k * &r.k;
    let km2 = &r.k_inv * &r.k_inv;
    let (nk, nki, ne, nf) = (max_norm(&r.k), max_norm(&r.k_inv), max_norm(&r.e), max_norm(&r.f));
    let rel = |m: DMatrix<f64>, scale: f64| max_norm(&m) / scale.max(1.0);
    [
        rel(&r.k * &r.k_inv - &id, nk * nki),
        rel(&r.k_inv * &r.k - &id, nk * nki),
        rel(&r.k * &r.e - q * &r.e * &r.k, nk * ne * q.max(1.0)),
        rel(&r.k * &r.f - &r.f * &r.k / q, nk * nf * (1.0 / q).max(1.0)),
        rel(
            &r.e * &r.f - &r.f * &r.e - (&k2 - &km2) / (q - 1.0 / q),
            ne * nf + max_norm(&(k2 + km2)) / (q - 1.0 / q).abs(),
        ),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Casimir from generator images, in the `EF` form.
fn casimir_from(k: &DMatrix<f64>, k_inv: &DMatrix<f64>, e: &DMatrix<f64>, f: &DMatrix<f64>, q: f64) -> DMatrix<f64> {
    let id = identity_like(k);
    let c = (1.0 / q - q).powi(2);
    (k * k / q + q * (k_inv * k_inv) - 2.0 * id) / c + e * f
}

/// Casimir in the `FE` form.
fn casimir_alt_from(
    k: &DMatrix<f64>,
    k_inv: &DMatrix<f64>,
    e: &DMatrix<f64>,
    f: &DMatrix<f64>,
    q: f64,
) -> DMatrix<f64> {
    let id = identity_like(k);
    let c = (1.0 / q - q).powi(2);
    (k_inv * k_inv / q + q * (k * k) - 2.0 * id) / c + f * e
}

/// `Omega` on one site.
pub fn casimir(r: &RepMatrices) -> DMatrix<f64> {
    casimir_from(&r.k, &r.k_inv, &r.e, &r.f, r.q)
}

/// `Omega` written with `FE`; equal to [`casimir`].
pub fn casimir_alt(r: &RepMatrices) -> DMatrix<f64> {
    casimir_alt_from(&r.k, &r.k_inv, &r.e, &r.f, r.q)
}

/// Difference of the two forms and the commutators with every generator,
/// scaled by the norms of the uncancelled Casimir terms and of the factors
/// (floored at 1).
pub fn casimir_residual(r: &RepMatrices) -> f64 {
    let om = casimir(r);
    let q = r.q;
    let c = (1.0 / q - q).powi(2);
    let terms = (max_norm(&(&r.k * &r.k)) / q + q * max_norm(&(&r.k_inv * &r.k_inv)) + 2.0) / c
        + max_norm(&r.e) * max_norm(&r.f);
    let no = terms.max(max_norm(&om)).max(1.0);
    let forms = max_norm(&(&om - casimir_alt(r))) / no;
    [&r.k, &r.k_inv, &r.e, &r.f]
        .into_iter()
        .map(|x| max_norm(&(&om * x - x * &om)) / (no * max_norm(x).max(1.0)))
        .fold(forms, f64::max)
}

/// Coproduct images on the sites `a` (left tensor factor) and `b`.
pub fn coproduct(a: &RepMatrices, b: &RepMatrices) -> TwoSiteOperator {
    TwoSiteOperator {
        dims: (a.k.nrows(), b.k.nrows()),
        q: a.q,
        k: a.k.kronecker(&b.k),
        k_inv: a.k_inv.kronecker(&b.k_inv),
        e: a.k.kronecker(&b.e) + a.e.kronecker(&b.k_inv),
        f: a.k.kronecker(&b.f) + a.f.kronecker(&b.k_inv),
    }
}

impl TwoSiteOperator {
    /// `Delta(Omega)` through the homomorphism property.
    pub fn casimir(&self) -> DMatrix<f64> {
        casimir_from(&self.k, &self.k_inv, &self.e, &self.f, self.q)
    }
}

/// `Delta(Omega)` from the expanded tensor formula.
pub fn casimir_expanded(a: &RepMatrices, b: &RepMatrices) -> DMatrix<f64> {
    let q = a.q;
    let (ka2, kb2) = (&a.k * &a.k, &b.k * &b.k);
    let (kai2, kbi2) = (&a.k_inv * &a.k_inv, &b.k_inv * &b.k_inv);
    let id = DMatrix::identity(a.k.nrows() * b.k.nrows(), a.k.nrows() * b.k.nrows());
    let scalar = (q * ka2.kronecker(&kb2) + kai2.kronecker(&kbi2) / q - 2.0 * id) / (1.0 / q - q).powi(2);
    scalar
        + ka2.kronecker(&(&b.f * &b.e))
        + (&a.k * &a.e).kronecker(&(&b.f * &b.k_inv))
        + (&a.f * &a.k).kronecker(&(&b.k_inv * &b.e))
        + (&a.f * &a.e).kronecker(&kbi2)
}

/// `Y_rho = q^{1/2} E K + q^{-1/2} F K - [rho](K^2 - 1)` from generator images.
fn y_from(k: &DMatrix<f64>, e: &DMatrix<f64>, f: &DMatrix<f64>, q: f64, rho: f64) -> DMatrix<f64> {
    let id = identity_like(k);
    q.sqrt() * (e * k) + (f * k) / q.sqrt() - q_bracket(rho, q) * (k * k - id)
}

/// `Y_rho` on one site.
pub fn y_rho(r: &RepMatrices, rho: f64) -> DMatrix<f64> {
    y_from(&r.k, &r.e, &r.f, r.q, rho)
}

/// `Y~_lambda = q^{-1/2} E K^{-1} + q^{1/2} F K^{-1} - [lambda](K^{-2} - 1)`.
pub fn y_tilde_lambda(r: &RepMatrices, lambda: f64) -> DMatrix<f64> {
    let q = r.q;
    let id = identity_like(&r.k);
    (&r.e * &r.k_inv) / q.sqrt() + q.sqrt() * (&r.f * &r.k_inv) - q_bracket(lambda, q) * (&r.k_inv * &r.k_inv - id)
}

/// `Delta(Y_rho)` through the homomorphism property.
pub fn delta_y_rho(t: &TwoSiteOperator, rho: f64) -> DMatrix<f64> {
    y_from(&t.k, &t.e, &t.f, t.q, rho)
}

/// `|Delta(Y_rho) - (K^2 (x) Y_rho + Y_rho (x) 1)|`.
pub fn y_coproduct_residual(a: &RepMatrices, b: &RepMatrices, rho: f64) -> f64 {
    let t = coproduct(a, b);
    let lhs = delta_y_rho(&t, rho);
    let rhs = (&a.k * &a.k).kronecker(&y_rho(b, rho)) + y_rho(a, rho).kronecker(&identity_like(&b.k));
    max_norm(&(lhs - rhs))
}

/// Generator of `spec` on the full state space, reindexed lexicographically.
fn lexicographic_generator(spec: &ProcessSpec) -> Result<DMatrix<f64>> {
    let caps = &spec.capacities;
    let sector = enumerate(caps, None)?;
    let l = build_generator(spec, &sector)?.to_dense();
    let lex = |s: &[u32]| s.iter().zip(caps).fold(0usize, |acc, (&x, &n)| acc * (n as usize + 1) + x as usize);
    let perm: Vec<usize> = sector.states().iter().map(|s| lex(s)).collect();
    let mut out = DMatrix::zeros(l.nrows(), l.ncols());
    for i in 0..l.nrows() {
        for j in 0..l.ncols() {
            out[(perm[i], perm[j])] = l[(i, j)];
        }
    }
    Ok(out)
}

/// `pi_{k,k+1}(Delta(Omega)) - [(N_k + N_{k+1} + 1)/2]^2` on sites `k, k+1`.
pub fn pair_generator(k: usize, capacities: &[u32], q: f64) -> Result<DMatrix<f64>> {
    let a = rep_matrices(k, capacities, q)?;
    let b = rep_matrices(k + 1, capacities, q)?;
    let om = coproduct(&a, &b).casimir();
    let c = q_bracket(0.5 * (a.capacity + b.capacity + 1) as f64, q).powi(2);
    Ok(&om - c * identity_like(&om))
}

/// `max |pi_{k,k+1}(Delta(Omega)) - const - L^{(k,k+1)}|`.
pub fn casimir_generator_residual(k: usize, capacities: &[u32], q: f64) -> Result<f64> {
    if k == 0 || k >= capacities.len() {
        return Err(Error::IndexOutOfRange { index: k, max: capacities.len().saturating_sub(1) });
    }
    let g = pair_generator(k, capacities, q)?;
    let spec = ProcessSpec::new(ProcessKind::Asep, q, 0.0, vec![capacities[k - 1], capacities[k]])?;
    let l = lexicographic_generator(&spec)?;
    Ok(max_norm(&(g - l)))
}

/// `sum_k pi_{k,k+1}(Delta(Omega) - const)` against the full generator.
pub fn summed_generator_residual(capacities: &[u32], q: f64) -> Result<f64> {
    let m = capacities.len();
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two sites".into()));
    }
    let dims: Vec<usize> = capacities.iter().map(|&n| n as usize + 1).collect();
    let total: usize = dims.iter().product();
    let mut sum = DMatrix::zeros(total, total);
    for k in 1..m {
        let left: usize = dims[..k - 1].iter().product();
        let right: usize = dims[k + 1..].iter().product();
        let block = pair_generator(k, capacities, q)?;
        sum +=
            DMatrix::<f64>::identity(left, left).kronecker(&block).kronecker(&DMatrix::<f64>::identity(right, right));
    }
    let spec = ProcessSpec::new(ProcessKind::Asep, q, 0.0, capacities.to_vec())?;
    Ok(max_norm(&(sum - lexicographic_generator(&spec)?)))
}

/// `max |E^T D - D F|` with `D = diag(w(n) q^{-2 n u_k})`: adjointness of
/// `E` and `F` for the weighted inner product.
pub fn star_residual(r: &RepMatrices, capacities: &[u32]) -> f64 {
    let q = r.q;
    let uk = u_k(capacities, r.site);
    let d = r.capacity as usize + 1;
    let dm = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            w_site(i as u32, r.capacity, q) * q.powf(-2.0 * i as f64 * uk)
        } else {
            0.0
        }
    });
    let lhs = r.e.transpose() * &dm;
    let rhs = &dm * &r.f;
    max_norm(&(&lhs - &rhs)) / max_norm(&lhs).max(1.0)
}

fn eigen_residual(op: &DMatrix<f64>, v: &[f64], mu: f64) -> f64 {
    let vec = nalgebra::DVector::from_column_slice(v);
    let scale = vec.amax().max(1e-300);
    (op * &vec - mu * &vec).amax() / scale
}

/// Single-site eigenrelation of `Y_rho` on `(-1)^n q^{n u_1} k(n, x; rho)`
/// with eigenvalue `[rho] - [rho + 2x - N]`. The sign undoes the opposite
/// sign convention of the off-diagonal generators relative to `k`.
pub fn y_site_eigen_residual(capacity: u32, q: f64, rho: f64, x: u32) -> Result<f64> {
    let caps = [capacity];
    let r = rep_matrices(1, &caps, q)?;
    let qr = q.powf(rho);
    let v: Vec<f64> = (0..=capacity)
        .map(|n| Ok(sign_pow(n) * q.powf(n as f64 * u_k(&caps, 1)) * k_site(n, x, qr, capacity, q)?))
        .collect::<Result<_>>()?;
    let mu = q_bracket(rho, q) - q_bracket(rho + 2.0 * x as f64 - capacity as f64, q);
    Ok(eigen_residual(&y_rho(&r, rho), &v, mu))
}

/// Two-site eigenrelation of `Delta(Y_rho)` on `(-1)^{|eta|} K_R(eta, xi)`
/// with eigenvalue `[rho] - [rho + 2|xi| - |N|]`.
pub fn y_eigen_residual(capacities: &[u32], q: f64, rho: f64, xi: &[u32]) -> Result<f64> {
    if capacities.len() != 2 || xi.len() != 2 {
        return Err(Error::InvalidArgument("two-site configuration expected".into()));
    }
    if xi[0] > capacities[0] || xi[1] > capacities[1] {
        return Err(Error::InvalidArgument("xi exceeds the capacities".into()));
    }
    let t = coproduct(&rep_matrices(1, capacities, q)?, &rep_matrices(2, capacities, q)?);
    let qr = q.powf(rho);
    let mut v = Vec::new();
    for n1 in 0..=capacities[0] {
        for n2 in 0..=capacities[1] {
            v.push(sign_pow(n1 + n2) * k_r_product(&[n1, n2], xi, capacities, qr, q)?);
        }
    }
    let nn = (capacities[0] + capacities[1]) as f64;
    let mu = q_bracket(rho, q) - q_bracket(rho + 2.0 * (xi[0] + xi[1]) as f64 - nn, q);
    Ok(eigen_residual(&delta_y_rho(&t, rho), &v, mu))
}

/// `f(A, B) = (q^2 + q^{-2}) A B A - A^2 B - B A^2`.
fn aw_bracket(a: &DMatrix<f64>, b: &DMatrix<f64>, q: f64) -> DMatrix<f64> {
    (q * q + 1.0 / (q * q)) * (a * b * a) - a * a * b - b * a * a
}

/// `Omega` rebuilt from `Y_rho` and `K^{-2}`.
fn casimir_decomposed(y: &DMatrix<f64>, km2: &DMatrix<f64>, q: f64, rho: f64) -> DMatrix<f64> {
    let id = identity_like(y);
    let br = q_bracket(rho, q);
    let a = y - br * &id;
    let s = q + 1.0 / q;
    let d2 = (q - 1.0 / q).powi(2);
    aw_bracket(&a, km2, q) / (s * d2) + s * km2 / d2 + br * &a / s - 2.0 / d2 * id
}

/// Residual of the decomposition of `Omega` in `Y_rho` and `K^{-2}` on one
/// site (`capacities.len() == 1`) or of its coproduct on two sites.
pub fn casimir_decomposition_residual(capacities: &[u32], q: f64, rho: f64) -> Result<f64> {
    let (om, y, km2) = match capacities.len() {
        1 => {
            let r = rep_matrices(1, capacities, q)?;
            (casimir(&r), y_rho(&r, rho), &r.k_inv * &r.k_inv)
        }
        2 => {
            let t = coproduct(&rep_matrices(1, capacities, q)?, &rep_matrices(2, capacities, q)?);
            (t.casimir(), delta_y_rho(&t, rho), &t.k_inv * &t.k_inv)
        }
        _ => return Err(Error::InvalidArgument("one or two sites expected".into())),
    };
    let rebuilt = casimir_decomposed(&y, &km2, q, rho);
    Ok(max_norm(&(om - &rebuilt)) / max_norm(&rebuilt).max(1.0))
}

/// Reversibility of the asep generator for the product weight, read off
/// from the self-adjointness of the pair operators.
pub fn weight_self_adjoint_residual(capacities: &[u32], q: f64) -> Result<f64> {
    let spec = ProcessSpec::new(ProcessKind::Asep, q, 0.0, capacities.to_vec())?;
    let l = lexicographic_generator(&spec)?;
    let mut states = Vec::new();
    let mut idx = vec![0u32; capacities.len()];
    loop {
        states.push(idx.clone());
        let mut k = capacities.len();
        loop {
            if k == 0 {
                let w: Vec<f64> = states.iter().map(|s| w_multi(s, capacities, q)).collect();
                let mut worst: f64 = 0.0;
                for i in 0..w.len() {
                    for j in 0..w.len() {
                        worst = worst.max((w[i] * l[(i, j)] - w[j] * l[(j, i)]).abs());
                    }
                }
                return Ok(worst);
            }
            k -= 1;
            if idx[k] < capacities[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representation_examples() {
        let r = rep_matrices(1, &[3], 0.7).unwrap();
        for n in 0..4 {
            assert!((r.k[(n, n)] - 0.7f64.powf(n as f64 - 1.5)).abs() < 1e-15);
            assert_eq!(r.e[(0, n)], 0.0);
        }
        assert!(relation_residual(&r) < 1e-13);
        assert!(rep_matrices(0, &[1], 0.5).is_err());
        assert!(rep_matrices(2, &[1], 0.5).is_err());
    }

    #[test]
    fn relations_hold() {
        for q in [0.5, 0.8, 1.25] {
            for n in 0..=4u32 {
                let caps = [2, n, 1];
                for k in 1..=3 {
                    let r = rep_matrices(k, &caps, q).unwrap();
                    assert!(relation_residual(&r) < 1e-13, "{q} {n} {k}");
                    assert!(casimir_residual(&r) < 1e-12);
                    assert!(star_residual(&r, &caps) < 1e-13);
                }
            }
        }
    }

    #[test]
    fn casimir_is_scalar_on_irreducible_site() {
        for n in [1u32, 3] {
            let r = rep_matrices(1, &[n], 0.6).unwrap();
            let c = q_bracket(0.5 * (n + 1) as f64, 0.6).powi(2);
            let om = casimir(&r);
            assert!((om - c * identity_like(&r.k)).amax() < 1e-12);
        }
    }

    #[test]
    fn two_site_casimir() {
        let caps = [2, 1];
        let a = rep_matrices(1, &caps, 0.7).unwrap();
        let b = rep_matrices(2, &caps, 0.7).unwrap();
        let t = coproduct(&a, &b);
        assert!((t.k.clone() - a.k.kronecker(&b.k)).amax() == 0.0);
        assert!((t.casimir() - casimir_expanded(&a, &b)).amax() < 1e-12);
        assert!(y_coproduct_residual(&a, &b, 0.4) < 1e-12);
    }

    #[test]
    fn generator_from_casimir() {
        assert!(casimir_generator_residual(1, &[1, 1], 0.5).unwrap() < 1e-12);
        assert!(casimir_generator_residual(1, &[2, 1], 1.3).unwrap() < 1e-12);
        assert!(casimir_generator_residual(2, &[1, 2, 3], 0.8).unwrap() < 1e-12);
        let g = pair_generator(1, &[2, 1], 0.5).unwrap();
        assert!(g.column(0).amax() < 1e-12 && g.row(0).amax() < 1e-12);
        assert!(summed_generator_residual(&[1, 2, 1], 0.6).unwrap() < 1e-12);
        assert!(weight_self_adjoint_residual(&[1, 2, 1], 0.6).unwrap() < 1e-12);
    }

    #[test]
    fn y_eigenfunctions() {
        let (q, rho) = (0.6, 0.3);
        for x in 0..=3 {
            assert!(y_site_eigen_residual(3, q, rho, x).unwrap() < 1e-11);
        }
        let caps = [2, 1];
        for xi in [[0, 0], [2, 1], [1, 0], [2, 0]] {
            assert!(y_eigen_residual(&caps, q, rho, &xi).unwrap() < 1e-11, "{xi:?}");
        }
    }

    #[test]
    fn decomposition() {
        assert!(casimir_decomposition_residual(&[2], 0.6, 0.3).unwrap() < 1e-12);
        assert!(casimir_decomposition_residual(&[1, 1], 0.8, -0.5).unwrap() < 1e-12);
        assert!(casimir_decomposition_residual(&[2, 1], 0.7, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn y_tilde_is_self_adjoint_for_weight() {
        let caps = [2];
        let r = rep_matrices(1, &caps, 0.6).unwrap();
        let y = y_tilde_lambda(&r, 0.4);
        let uk = u_k(&caps, 1);
        let d = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                w_site(i as u32, 2, 0.6) * 0.6f64.powf(-2.0 * i as f64 * uk)
            } else {
                0.0
            }
        });
        assert!((y.transpose() * &d - &d * &y).amax() < 1e-12);
    }
}
