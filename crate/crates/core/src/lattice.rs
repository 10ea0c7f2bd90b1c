//! Configurations on a finite chain of sites with capacities, height
//! functions, state enumeration and nearest-neighbour moves.
//!
//! Sites are 1-based in the public API; storage is 0-based.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// Occupation numbers together with the site capacities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    occupations: Vec<u32>,
    capacities: Arc<[u32]>,
}

impl Configuration {
    pub fn new(occupations: Vec<u32>, capacities: Vec<u32>) -> Result<Self> {
        if occupations.len() != capacities.len() || occupations.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} occupations for {} capacities",
                occupations.len(),
                capacities.len()
            )));
        }
        if capacities.contains(&0) {
            return Err(Error::InvalidArgument("capacities must be positive".into()));
        }
        if let Some(k) = occupations.iter().zip(&capacities).position(|(o, c)| o > c) {
            return Err(Error::IndexOutOfRange { index: occupations[k] as usize, max: capacities[k] as usize });
        }
        Ok(Configuration { occupations, capacities: capacities.into() })
    }

    /// The empty configuration.
    pub fn empty(capacities: Vec<u32>) -> Result<Self> {
        Self::new(vec![0; capacities.len()], capacities)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occupations
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn sites(&self) -> usize {
        self.occupations.len()
    }

    pub fn total(&self) -> u32 {
        self.occupations.iter().sum()
    }
}

/// Which height function [`height`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `sum_{j >= k} (2 x_j - N_j)` for 1-based `k`; zero for `k = M + 1`.
pub fn tail_sum(occ: &[u32], caps: &[u32], k: usize) -> i64 {
    (k.max(1)..=occ.len()).map(|j| 2 * occ[j - 1] as i64 - caps[j - 1] as i64).sum()
}

/// `sum_{j <= k} (2 x_j - N_j)` for 1-based `k`; zero for `k = 0`.
pub fn head_sum(occ: &[u32], caps: &[u32], k: usize) -> i64 {
    (1..=k.min(occ.len())).map(|j| 2 * occ[j - 1] as i64 - caps[j - 1] as i64).sum()
}

/// `h^+_k = rho + sum_{j >= k} (2 xi_j - N_j)`, `1 <= k <= M + 1`.
pub fn h_plus(occ: &[u32], caps: &[u32], rho: f64, k: usize) -> f64 {
    rho + tail_sum(occ, caps, k) as f64
}

/// `h^-_k = lambda + sum_{j <= k} (2 zeta_j - N_j)`, `0 <= k <= M`.
pub fn h_minus(occ: &[u32], caps: &[u32], lam: f64, k: usize) -> f64 {
    lam + head_sum(occ, caps, k) as f64
}

/// Height function with range checking.
pub fn height(side: Side, config: &Configuration, k: usize, boundary: f64) -> Result<f64> {
    let m = config.sites();
    match side {
        Side::Plus if (1..=m + 1).contains(&k) => Ok(h_plus(config.occupations(), config.capacities(), boundary, k)),
        Side::Minus if k <= m => Ok(h_minus(config.occupations(), config.capacities(), boundary, k)),
        Side::Plus => Err(Error::IndexOutOfRange { index: k, max: m + 1 }),
        Side::Minus => Err(Error::IndexOutOfRange { index: k, max: m }),
    }
}

/// `u(eta; N) = sum_k (eta_k N_k - 2 eta_k sum_{j <= k} N_j)`.
pub fn u_sum(occ: &[u32], caps: &[u32]) -> i64 {
    let mut prefix = 0i64;
    let mut u = 0i64;
    for (&e, &n) in occ.iter().zip(caps) {
        prefix += n as i64;
        u += e as i64 * n as i64 - 2 * e as i64 * prefix;
    }
    u
}

pub fn u_factor(config: &Configuration) -> f64 {
    u_sum(config.occupations(), config.capacities()) as f64
}

/// Moves one particle between neighbouring 1-based sites.
pub fn apply_move(config: &Configuration, from: usize, to: usize) -> Result<Configuration> {
    let m = config.sites();
    let illegal = Error::IllegalMove { from, to };
    if from == 0 || to == 0 || from > m || to > m || from.abs_diff(to) != 1 {
        return Err(illegal);
    }
    let occ = config.occupations();
    if occ[from - 1] == 0 || occ[to - 1] >= config.capacities()[to - 1] {
        return Err(illegal);
    }
    let mut out = occ.to_vec();
    out[from - 1] -= 1;
    out[to - 1] += 1;
    Ok(Configuration { occupations: out, capacities: config.capacities.clone() })
}

/// Site order reversed, for occupations and capacities alike.
pub fn reverse_config(config: &Configuration) -> Configuration {
    let mut occ = config.occupations().to_vec();
    let mut caps = config.capacities().to_vec();
    occ.reverse();
    caps.reverse();
    Configuration { occupations: occ, capacities: caps.into() }
}

/// Ordered list of configurations for a capacity vector, optionally
/// restricted to a fixed total.
#[derive(Debug, Clone)]
pub struct StateSector {
    capacities: Vec<u32>,
    total: Option<u32>,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl StateSector {
    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn total(&self) -> Option<u32> {
        self.total
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn configuration(&self, i: usize) -> Configuration {
        Configuration { occupations: self.states[i].clone(), capacities: self.capacities.clone().into() }
    }

    /// Particle totals of all states, in order.
    pub fn totals(&self) -> Vec<u32> {
        self.states.iter().map(|s| s.iter().sum()).collect()
    }
}

/// Mixed-radix lexicographic enumeration; site 1 is the most significant digit.
pub fn enumerate(capacities: &[u32], total: Option<u32>) -> Result<StateSector> {
    if capacities.is_empty() {
        return Err(Error::InvalidArgument("at least one site is required".into()));
    }
    let mut states = Vec::new();
    let mut cur = vec![0u32; capacities.len()];
    loop {
        if total.is_none_or(|t| cur.iter().sum::<u32>() == t) {
            states.push(cur.clone());
        }
        // increment the last digit with carry
        let mut j = capacities.len();
        loop {
            if j == 0 {
                let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                return Ok(StateSector { capacities: capacities.to_vec(), total, states, index });
            }
            j -= 1;
            if cur[j] < capacities[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(o: &[u32], c: &[u32]) -> Configuration {
        Configuration::new(o.to_vec(), c.to_vec()).unwrap()
    }

    #[test]
    fn height_examples() {
        let x = cfg(&[1, 0], &[1, 1]);
        assert_eq!(height(Side::Plus, &x, 3, 0.7).unwrap(), 0.7);
        assert_eq!(height(Side::Plus, &x, 1, 0.0).unwrap(), 0.0);
        assert_eq!(height(Side::Plus, &x, 2, 0.0).unwrap(), -1.0);
        assert_eq!(height(Side::Minus, &cfg(&[0, 0], &[1, 1]), 2, 2.5).unwrap(), 0.5);
        assert!(height(Side::Plus, &x, 4, 0.0).is_err());
        assert!(height(Side::Minus, &x, 3, 0.0).is_err());
    }

    #[test]
    fn u_examples() {
        assert_eq!(u_factor(&cfg(&[0, 0], &[1, 1])), 0.0);
        assert_eq!(u_factor(&cfg(&[1, 0], &[1, 1])), -1.0);
        let e = cfg(&[1, 0], &[1, 1]);
        assert_eq!(u_factor(&e) + u_factor(&reverse_config(&e)), -4.0);
    }

    #[test]
    fn move_examples() {
        let m = apply_move(&cfg(&[1, 0], &[1, 1]), 1, 2).unwrap();
        assert_eq!(m.occupations(), &[0, 1]);
        assert!(apply_move(&cfg(&[0, 1], &[1, 1]), 1, 2).is_err());
        assert!(apply_move(&cfg(&[2, 1], &[2, 2]), 2, 1).is_err());
        assert!(apply_move(&cfg(&[1, 0, 0], &[1, 1, 1]), 1, 3).is_err());
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(enumerate(&[1, 2], None).unwrap().len(), 6);
        let s = enumerate(&[1, 1], Some(1)).unwrap();
        assert_eq!(s.states(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(enumerate(&[2, 2], Some(2)).unwrap().len(), 3);
    }

    #[test]
    fn reverse_examples() {
        let r = reverse_config(&cfg(&[1, 0], &[1, 2]));
        assert_eq!((r.occupations(), r.capacities()), (&[0, 1][..], &[2, 1][..]));
        let p = cfg(&[1, 1], &[1, 1]);
        assert_eq!(reverse_config(&p), p);
        let t = cfg(&[0, 2, 1], &[1, 2, 3]);
        assert_eq!(reverse_config(&reverse_config(&t)), t);
    }

    fn config_strategy() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        prop::collection::vec(1u32..4, 1..6).prop_flat_map(|caps| {
            let occ: Vec<_> = caps.iter().map(|&c| 0..=c).collect();
            (occ, Just(caps))
        })
    }

    proptest! {
        #[test]
        fn first_height_is_conserved_quantity((occ, caps) in config_strategy(), rho in -3.0f64..3.0) {
            let total: u32 = occ.iter().sum();
            let n: u32 = caps.iter().sum();
            let h1 = h_plus(&occ, &caps, rho, 1);
            prop_assert!((h1 - (rho + 2.0 * total as f64 - n as f64)).abs() < 1e-12);
        }

        #[test]
        fn height_step((occ, caps) in config_strategy(), rho in -3.0f64..3.0) {
            for k in 1..=occ.len() {
                let d = h_plus(&occ, &caps, rho, k) - h_plus(&occ, &caps, rho, k + 1);
                prop_assert!((d - (2.0 * occ[k - 1] as f64 - caps[k - 1] as f64)).abs() < 1e-12);
            }
        }

        #[test]
        fn reversal_swaps_heights((occ, caps) in config_strategy(), lam in -3.0f64..3.0) {
            let m = occ.len();
            let c = Configuration::new(occ.clone(), caps.clone()).unwrap();
            let r = reverse_config(&c);
            for k in 1..=m {
                let a = h_plus(r.occupations(), r.capacities(), lam, m - k + 1);
                prop_assert_eq!(a, h_minus(&occ, &caps, lam, k));
            }
        }

        #[test]
        fn product_identity(a in prop::collection::vec(-5i64..6, 1..6), b0 in prop::collection::vec(-5i64..6, 6)) {
            let b = &b0[..a.len()];
            let m = a.len();
            let lhs: i64 = a.iter().sum::<i64>() * b.iter().sum::<i64>();
            let mut r1 = 0; let mut r2 = 0;
            for k in 0..m {
                for j in k + 1..m { r1 += a[k] * b[j] + a[j] * b[k]; }
                for j in 0..k { r2 += a[k] * b[j] + a[j] * b[k]; }
                r1 += a[k] * b[k]; r2 += a[k] * b[k];
            }
            prop_assert_eq!(lhs, r1);
            prop_assert_eq!(lhs, r2);
        }

        #[test]
        fn u_reversal_identity((occ, caps) in config_strategy()) {
            let c = Configuration::new(occ, caps).unwrap();
            let r = reverse_config(&c);
            let n: u32 = c.capacities().iter().sum();
            prop_assert_eq!(u_factor(&c) + u_factor(&r), -2.0 * c.total() as f64 * n as f64);
        }

        #[test]
        fn moves_conserve_particles((occ, caps) in config_strategy(), k in 1usize..6, right in any::<bool>()) {
            let c = Configuration::new(occ, caps).unwrap();
            let to = if right { k + 1 } else { k.wrapping_sub(1) };
            if let Ok(d) = apply_move(&c, k, to) {
                prop_assert_eq!(d.total(), c.total());
            }
        }

        #[test]
        fn enumeration_is_bijective(caps in prop::collection::vec(1u32..4, 1..4), t in 0u32..6) {
            let full = enumerate(&caps, None).unwrap();
            prop_assert_eq!(full.len(), caps.iter().map(|&c| c as usize + 1).product::<usize>());
            for (i, s) in full.states().iter().enumerate() {
                prop_assert_eq!(full.index_of(s), Some(i));
            }
            let sec = enumerate(&caps, Some(t)).unwrap();
            let expect = full.states().iter().filter(|s| s.iter().sum::<u32>() == t).count();
            prop_assert_eq!(sec.len(), expect);
        }
    }
}
