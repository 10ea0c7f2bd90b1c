//! Exact expectations by uniformization, Gillespie sample paths, the
//! hyperbolic current and the first-moment identity for it.

use crate::error::{Error, Result};
use crate::lattice::{enumerate, h_plus, Configuration, StateSector};
use crate::processes::{build_generator, transitions, GeneratorMatrix, ProcessKind, ProcessSpec};
use crate::qspecial::q_bracket;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};
use std::io::Write;

/// Truncation bound on the discarded Poisson mass in uniformization.
pub const POISSON_TAIL: f64 = 1e-12;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "DYNASEP_THREADS";

/// A sample path: event times (starting at 0) and the configuration after
/// each event.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: ProcessSpec,
    pub seed: u64,
    pub t_end: f64,
    times: Vec<f64>,
    states: Vec<Vec<u32>>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    /// Number of recorded configurations, the initial one included.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn events(&self) -> usize {
        self.times.len() - 1
    }

    pub fn initial(&self) -> &[u32] {
        &self.states[0]
    }

    /// Configuration in force at time `t`.
    pub fn state_at(&self, t: f64) -> &[u32] {
        let i = self.times.partition_point(|&s| s <= t);
        &self.states[i.saturating_sub(1)]
    }

    pub fn final_state(&self) -> &[u32] {
        self.states.last().expect("trajectory has an initial state")
    }

    /// CSV with header `t,site_1,...,site_M`, one row per recorded state.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.spec.sites()).map(|k| format!("site_{k}")));
        w.write_record(&header).map_err(io_err)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![format!("{t}")];
            row.extend(s.iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Generator seeded from `seed` on stream `stream`; distinct streams never
/// overlap, so run `i` of a batch is reproducible on any thread count.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exp_sample<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Simulates `spec` from `initial` up to `t_end`.
pub fn gillespie_run(spec: &ProcessSpec, initial: &Configuration, t_end: f64, seed: u64) -> Result<Trajectory> {
    let mut rng = stream_rng(seed, 0);
    let mut traj = gillespie_with_rng(spec, initial.occupations(), t_end, &mut rng)?;
    traj.seed = seed;
    Ok(traj)
}

/// Gillespie run drawing from a caller-provided generator.
pub fn gillespie_with_rng<R: Rng>(spec: &ProcessSpec, initial: &[u32], t_end: f64, rng: &mut R) -> Result<Trajectory> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be finite and nonnegative, got {t_end}")));
    }
    Configuration::new(initial.to_vec(), spec.capacities.clone())?;
    let mut times = vec![0.0];
    let mut states = vec![initial.to_vec()];
    let mut t = 0.0;
    let mut cur = initial.to_vec();
    loop {
        let moves = transitions(spec, &cur)?;
        let total: f64 = moves.iter().map(|m| m.1).sum();
        if total <= 0.0 {
            break;
        }
        let dt = exp_sample(rng, total);
        if t + dt > t_end {
            break;
        }
        t += dt;
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = moves.len() - 1;
        for (i, (_, r)) in moves.iter().enumerate() {
            if pick < *r {
                chosen = i;
                break;
            }
            pick -= r;
        }
        cur = moves[chosen].0.clone();
        times.push(t);
        states.push(cur.clone());
    }
    Ok(Trajectory { spec: spec.clone(), seed: 0, t_end, times, states })
}

/// State at time `t` of one run, without recording the path.
fn endpoint<R: Rng>(spec: &ProcessSpec, initial: &[u32], t_end: f64, rng: &mut R) -> Result<Vec<u32>> {
    let mut t = 0.0;
    let mut cur = initial.to_vec();
    loop {
        let mut moves = transitions(spec, &cur)?;
        let total: f64 = moves.iter().map(|m| m.1).sum();
        if total <= 0.0 {
            return Ok(cur);
        }
        t += exp_sample(rng, total);
        if t > t_end {
            return Ok(cur);
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = moves.len() - 1;
        for (i, (_, r)) in moves.iter().enumerate() {
            if pick < *r {
                chosen = i;
                break;
            }
            pick -= r;
        }
        cur = moves.swap_remove(chosen).0;
    }
}

/// Thread pool honoring `DYNASEP_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Endpoints of `runs` independent runs; run `i` uses stream `i`.
pub fn sample_endpoints(
    spec: &ProcessSpec,
    initial: &[u32],
    t_end: f64,
    runs: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    thread_pool()?.install(|| {
        (0..runs).into_par_iter().map(|i| endpoint(spec, initial, t_end, &mut stream_rng(seed, i as u64))).collect()
    })
}

/// Anything uniformization can exponentiate.
pub trait RateOperator {
    fn dim(&self) -> usize;
    /// `(L f)(i) = sum_j L(i, j) f(j)`.
    fn apply(&self, f: &[f64]) -> Vec<f64>;
    fn max_exit_rate(&self) -> f64;
}

impl RateOperator for GeneratorMatrix {
    fn dim(&self) -> usize {
        GeneratorMatrix::dim(self)
    }
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        GeneratorMatrix::apply(self, f)
    }
    fn max_exit_rate(&self) -> f64 {
        GeneratorMatrix::max_exit_rate(self)
    }
}

impl RateOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(f)).as_slice().to_vec()
    }
    fn max_exit_rate(&self) -> f64 {
        (0..self.nrows()).map(|i| -self[(i, i)]).fold(0.0, f64::max)
    }
}

/// Number of Poisson terms kept so the discarded mass is at most
/// [`POISSON_TAIL`].
pub fn poisson_truncation(mean: f64) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut n = mean.ceil() as u64;
    while p.sf(n) > POISSON_TAIL {
        n += 1 + (mean.sqrt() as u64) / 4;
    }
    Ok(n)
}

/// `e^{tL} f` by uniformization: with `Lambda` the largest exit rate and
/// `P = I + L / Lambda`, sums `Pois(n; Lambda t) P^n f` up to the
/// truncation point of [`poisson_truncation`].
pub fn expectation_vector<G: RateOperator>(gen: &G, f: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite and nonnegative, got {t}")));
    }
    if f.len() != gen.dim() {
        return Err(Error::InvalidArgument("observable length does not match the state space".into()));
    }
    let lam = gen.max_exit_rate();
    if t == 0.0 || lam == 0.0 {
        return Ok(f.to_vec());
    }
    let mean = lam * t;
    let n_max = poisson_truncation(mean)?;
    let mut acc = vec![0.0; f.len()];
    let mut cur = f.to_vec();
    let mut log_w = -mean;
    for n in 0..=n_max {
        if n > 0 {
            log_w += mean.ln() - (n as f64).ln();
            let lf = gen.apply(&cur);
            for (c, l) in cur.iter_mut().zip(lf) {
                *c += l / lam;
            }
        }
        let w = log_w.exp();
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += w * c;
        }
    }
    Ok(acc)
}

/// `(e^{tL} f)(initial)`.
pub fn ctmc_expectation<G: RateOperator>(gen: &G, f: &[f64], initial: usize, t: f64) -> Result<f64> {
    if initial >= gen.dim() {
        return Err(Error::IndexOutOfRange { index: initial, max: gen.dim() });
    }
    Ok(expectation_vector(gen, f, t)?[initial])
}

/// `J^hyp_k(t) = [h^+_k(xi(t))] / [h^+_k(xi(0))]` along a path (1-based `k`).
pub fn hyperbolic_current(traj: &Trajectory, k: usize) -> Result<Vec<f64>> {
    let (caps, q, rho) = current_context(traj, k)?;
    let h0 = q_bracket(h_plus(traj.initial(), caps, rho, k), q);
    if h0 == 0.0 {
        return Err(Error::DivisionByZero("[h^+_k] vanishes at the initial configuration".into()));
    }
    Ok(traj.states.iter().map(|s| q_bracket(h_plus(s, caps, rho, k), q) / h0).collect())
}

/// `h^+_k(xi(t)) - h^+_k(xi(0))`, twice the particle current through bond `k`.
pub fn height_increments(traj: &Trajectory, k: usize) -> Result<Vec<f64>> {
    let (caps, _, rho) = current_context(traj, k)?;
    let h0 = h_plus(traj.initial(), caps, rho, k);
    Ok(traj.states.iter().map(|s| h_plus(s, caps, rho, k) - h0).collect())
}

fn current_context(traj: &Trajectory, k: usize) -> Result<(&[u32], f64, f64)> {
    let m = traj.spec.sites();
    if k == 0 || k > m + 1 {
        return Err(Error::IndexOutOfRange { index: k, max: m + 1 });
    }
    let rho = if traj.spec.kind == ProcessKind::AsepR || traj.spec.kind == ProcessKind::SsepR {
        traj.spec.boundary
    } else {
        0.0
    };
    Ok((&traj.spec.capacities, traj.spec.q, rho))
}

/// Walker on `{1, ..., M}` jumping `i -> i-1` at `q^{N_i}[N_{i-1}]` and
/// `i -> i+1` at `q^{-N_i}[N_{i+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerSpec {
    pub capacities: Vec<u32>,
    pub q: f64,
}

impl WalkerSpec {
    pub fn new(capacities: Vec<u32>, q: f64) -> Result<Self> {
        if capacities.is_empty() || capacities.contains(&0) {
            return Err(Error::InvalidArgument("walker needs positive capacities".into()));
        }
        Ok(WalkerSpec { capacities, q })
    }

    /// `(left, right)` rates out of site `i` (1-based); zero at the ends.
    pub fn rates(&self, i: usize) -> (f64, f64) {
        let n = &self.capacities;
        let q = self.q;
        let ni = n[i - 1] as f64;
        let left = if i > 1 { q.powf(ni) * q_bracket(n[i - 2] as f64, q) } else { 0.0 };
        let right = if i < n.len() { q.powf(-ni) * q_bracket(n[i] as f64, q) } else { 0.0 };
        (left, right)
    }

    /// Dense generator; row/column `i - 1` is site `i`.
    pub fn generator(&self) -> DMatrix<f64> {
        let m = self.capacities.len();
        let mut g = DMatrix::zeros(m, m);
        for i in 1..=m {
            let (l, r) = self.rates(i);
            if i > 1 {
                g[(i - 1, i - 2)] = l;
            }
            if i < m {
                g[(i - 1, i)] = r;
            }
            g[(i - 1, i - 1)] = -(l + r);
        }
        g
    }
}

/// Both sides of the first-moment identity for the hyperbolic current of
/// `asep_r`, each computed by uniformization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl CurrentCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

fn prefix(caps: &[u32], lo: usize, hi: usize) -> f64 {
    // sum_{lo <= j <= hi} N_j, 1-based, empty when lo > hi
    if lo > hi {
        0.0
    } else {
        caps[lo - 1..hi].iter().sum::<u32>() as f64
    }
}

/// `E_xi[J^hyp_k(t)]` two ways: directly on the `asep_r` generator, and as
/// the boundary term plus walker expectations.
pub fn current_theorem_check(
    capacities: &[u32],
    q: f64,
    rho: f64,
    xi: &[u32],
    k: usize,
    t: f64,
) -> Result<CurrentCheck> {
    let m = capacities.len();
    if k == 0 || k > m {
        return Err(Error::IndexOutOfRange { index: k, max: m });
    }
    let spec = ProcessSpec::new(ProcessKind::AsepR, q, rho, capacities.to_vec())?;
    let total: u32 = xi.iter().sum();
    let sector = enumerate(capacities, Some(total))?;
    let start = sector.index_of(xi).ok_or_else(|| Error::InvalidArgument("xi is not a valid configuration".into()))?;
    let hk = q_bracket(h_plus(xi, capacities, rho, k), q);
    if hk == 0.0 {
        return Err(Error::DivisionByZero("[h^+_k] vanishes at the initial configuration".into()));
    }
    let gen = build_generator(&spec, &sector)?;
    let f: Vec<f64> = sector.states().iter().map(|s| q_bracket(h_plus(s, capacities, rho, k), q) / hk).collect();
    let lhs = ctmc_expectation(&gen, &f, start, t)?;

    let h = |n: usize| q_bracket(h_plus(xi, capacities, rho, n), q);
    let nn: f64 = capacities.iter().sum::<u32>() as f64;
    let mut rhs = q.powf(prefix(capacities, 1, k - 1)) * q_bracket(rho + 2.0 * total as f64 - nn, q) / hk;
    if k > 1 {
        let walker = WalkerSpec::new(capacities.to_vec(), q)?;
        let g: Vec<f64> = (1..=m)
            .map(|n| {
                let nn = capacities[n - 1] as f64;
                q.powf(prefix(capacities, 1, n)) / q_bracket(nn, q) * (q.powf(-nn) * h(n + 1) - h(n))
            })
            .collect();
        let eg = expectation_vector(&walker.generator(), &g, t)?;
        for i in 1..k {
            let ni = capacities[i - 1] as f64;
            let coeff = q.powf(prefix(capacities, i + 1, k - 1) - prefix(capacities, 1, i - 1)) * q_bracket(ni, q) / hk;
            rhs += coeff * eg[i - 1];
        }
    }
    Ok(CurrentCheck { lhs, rhs })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub runs: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        McEstimate { mean, std_err: (var / n).sqrt(), runs: xs.len() }
    }

    /// Whether `exact` lies within `sigmas` standard errors.
    pub fn agrees(&self, exact: f64, sigmas: f64) -> bool {
        (self.mean - exact).abs() <= sigmas * self.std_err.max(1e-15)
    }
}

/// Monte Carlo `E_xi[J^hyp_k(t)]` over `runs` independent paths.
pub fn current_monte_carlo(
    capacities: &[u32],
    q: f64,
    rho: f64,
    xi: &[u32],
    k: usize,
    t: f64,
    runs: usize,
    seed: u64,
) -> Result<McEstimate> {
    let spec = ProcessSpec::new(ProcessKind::AsepR, q, rho, capacities.to_vec())?;
    let hk = q_bracket(h_plus(xi, capacities, rho, k), q);
    if hk == 0.0 {
        return Err(Error::DivisionByZero("[h^+_k] vanishes at the initial configuration".into()));
    }
    let ends = sample_endpoints(&spec, xi, t, runs, seed)?;
    let xs: Vec<f64> = ends.iter().map(|s| q_bracket(h_plus(s, capacities, rho, k), q) / hk).collect();
    Ok(McEstimate::from_samples(&xs))
}

/// Pearson chi-square goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Tests `counts` against `probs` (normalized internally); cells with zero
/// expected mass must be empty.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(Error::InvalidArgument(
            "need matching count and probability vectors with at least two cells".into(),
        ));
    }
    let n: u64 = counts.iter().sum();
    let z: f64 = probs.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n as f64 * p / z;
        if e == 0.0 {
            if c > 0 {
                return Err(Error::InvalidArgument("observed count in a cell of zero probability".into()));
            }
            continue;
        }
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareResult { statistic: stat, dof, p_value: dist.sf(stat) })
}

/// Histogram of configurations over a sector.
pub fn histogram(sector: &StateSector, samples: &[Vec<u32>]) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; sector.len()];
    for s in samples {
        let i = sector.index_of(s).ok_or_else(|| Error::InvalidArgument("sample outside the sector".into()))?;
        counts[i] += 1;
    }
    Ok(counts)
}

/// First holding times at `state` over `samples` runs.
pub fn holding_times(spec: &ProcessSpec, state: &[u32], samples: usize, seed: u64) -> Result<Vec<f64>> {
    let total: f64 = transitions(spec, state)?.iter().map(|m| m.1).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("absorbing state has no holding time".into()));
    }
    Ok((0..samples).map(|i| exp_sample(&mut stream_rng(seed, i as u64), total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{measure_vector, MeasureKind};

    fn asep_r(caps: &[u32], q: f64, rho: f64) -> ProcessSpec {
        ProcessSpec::new(ProcessKind::AsepR, q, rho, caps.to_vec()).unwrap()
    }

    #[test]
    fn empty_initial_state_has_no_events() {
        let spec = asep_r(&[1, 2], 0.7, 0.3);
        let c = Configuration::new(vec![0, 0], vec![1, 2]).unwrap();
        let t = gillespie_run(&spec, &c, 10.0, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.events(), 0);
    }

    #[test]
    fn paths_are_well_formed_and_reproducible() {
        let spec = asep_r(&[2, 2, 2, 2], 0.8, 1.0);
        let c = Configuration::new(vec![2, 0, 1, 1], vec![2, 2, 2, 2]).unwrap();
        let a = gillespie_run(&spec, &c, 10.0, 7).unwrap();
        let b = gillespie_run(&spec, &c, 10.0, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.events() > 10);
        for w in a.times().windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in a.states().windows(2) {
            let diff: Vec<i64> = w[0].iter().zip(&w[1]).map(|(x, y)| *y as i64 - *x as i64).collect();
            assert_eq!(diff.iter().sum::<i64>(), 0);
            assert_eq!(diff.iter().map(|d| d.abs()).sum::<i64>(), 2);
            let i = diff.iter().position(|&d| d != 0).unwrap();
            assert_eq!(diff[i + 1].abs(), 1);
        }
        let csv = a.to_csv_string().unwrap();
        assert!(csv.starts_with("t,site_1,site_2,site_3,site_4\n"));
        assert_eq!(csv.lines().count(), a.len() + 1);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn expectation_basics() {
        let spec = asep_r(&[1, 2, 1], 0.6, 0.4);
        let s = enumerate(&spec.capacities, None).unwrap();
        let g = build_generator(&spec, &s).unwrap();
        let f: Vec<f64> = (0..s.len()).map(|i| i as f64).collect();
        assert_eq!(ctmc_expectation(&g, &f, 3, 0.0).unwrap(), 3.0);
        let ones = vec![1.0; s.len()];
        for t in [0.1, 1.0, 25.0] {
            assert!((ctmc_expectation(&g, &ones, 5, t).unwrap() - 1.0).abs() < 1e-12);
        }
        // against the dense matrix exponential via eigen-free Taylor at small t
        let d = g.to_dense();
        let t = 0.05;
        let mut term = DMatrix::identity(s.len(), s.len());
        let mut expm = term.clone();
        for n in 1..40 {
            term = &term * &d * (t / n as f64);
            expm += &term;
        }
        let want = &expm * nalgebra::DVector::from_vec(f.clone());
        let got = expectation_vector(&g, &f, t).unwrap();
        for i in 0..s.len() {
            assert!((want[i] - got[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn hyperbolic_current_examples() {
        let spec = asep_r(&[1, 1, 1], 0.6, 0.4);
        let c = Configuration::new(vec![1, 0, 1], vec![1, 1, 1]).unwrap();
        let tr = gillespie_run(&spec, &c, 3.0, 3).unwrap();
        for k in 1..=4 {
            assert_eq!(hyperbolic_current(&tr, k).unwrap()[0], 1.0);
        }
        // a right jump 1 -> 2 raises h^+_2 by 2
        let one = Trajectory {
            spec: spec.clone(),
            seed: 0,
            t_end: 1.0,
            times: vec![0.0, 0.5],
            states: vec![vec![1, 0, 1], vec![0, 1, 1]],
        };
        assert_eq!(height_increments(&one, 2).unwrap(), vec![0.0, 2.0]);
        assert!(hyperbolic_current(&one, 5).is_err());
        let zero = asep_r(&[1, 1], 0.6, 0.0);
        let z = Trajectory { spec: zero, seed: 0, t_end: 1.0, times: vec![0.0], states: vec![vec![1, 0]] };
        assert!(matches!(hyperbolic_current(&z, 1), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn current_theorem_examples() {
        let caps = [1, 1, 1];
        for k in 1..=3 {
            let c = current_theorem_check(&caps, 0.6, 0.4, &[1, 0, 1], k, 0.0).unwrap();
            assert!((c.lhs - 1.0).abs() < 1e-14 && (c.rhs - 1.0).abs() < 1e-12);
            for t in [0.1, 0.5, 2.0] {
                let c = current_theorem_check(&caps, 0.6, 0.4, &[1, 0, 1], k, t).unwrap();
                assert!(c.residual() < 1e-8, "k={k} t={t} {c:?}");
            }
        }
        let c1 = current_theorem_check(&caps, 0.6, 0.4, &[1, 0, 1], 1, 2.0).unwrap();
        assert!((c1.lhs - 1.0).abs() < 1e-12);
        let c = current_theorem_check(&[2, 1, 2], 0.8, -0.7, &[1, 1, 0], 3, 0.7).unwrap();
        assert!(c.residual() < 1e-8);
    }

    #[test]
    fn walker_rates() {
        let w = WalkerSpec::new(vec![1, 2, 3], 0.5).unwrap();
        assert_eq!(w.rates(1).0, 0.0);
        assert_eq!(w.rates(3).1, 0.0);
        let (l, r) = w.rates(2);
        assert!((l - 0.25 * 1.0).abs() < 1e-15);
        assert!((r - 4.0 * q_bracket(3.0, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn stationary_histogram_matches_measure() {
        let caps = [1, 1];
        let spec = asep_r(&caps, 0.7, 0.5);
        let sector = enumerate(&caps, Some(1)).unwrap();
        let ends = sample_endpoints(&spec, &[1, 0], 20.0, 20_000, 11).unwrap();
        let counts = histogram(&sector, &ends).unwrap();
        let mu = measure_vector(MeasureKind::WR, &spec, &sector).unwrap();
        let r = chi_square(&counts, &mu).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
    }

    #[test]
    fn holding_time_mean() {
        let spec = asep_r(&[2, 1], 0.7, 0.5);
        let xs = holding_times(&spec, &[1, 0], 20_000, 5).unwrap();
        let exit: f64 = transitions(&spec, &[1, 0]).unwrap().iter().map(|m| m.1).sum();
        assert!(McEstimate::from_samples(&xs).agrees(1.0 / exit, 3.0));
    }

    #[test]
    fn chi_square_rejects_bad_fit() {
        let r = chi_square(&[500, 500], &[0.9, 0.1]).unwrap();
        assert!(r.p_value < 1e-6);
        assert!(chi_square(&[1, 0], &[0.0, 1.0]).is_err());
    }
}
