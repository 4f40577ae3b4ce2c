//! Seeded simulation of the equilibrium chain.
//!
//! Every sample draws from its own ChaCha8 stream: the generator is keyed by the run
//! seed and the stream number is the sample index. Samples are computed in parallel
//! and collected by index, so results do not depend on the worker count.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::deviations::Side;
use crate::error::{Error, Result};
use crate::thermo::GibbsChain;

/// Identifier of the random source recorded in reports.
pub const RNG_ALGORITHM: &str = "chacha8/seed=run-seed/stream=sample-index";

/// Per-sample step cap.
pub const MAX_STEPS: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_returns: usize,
    pub n_samples: usize,
    /// Window length for visit counts.
    pub horizon: usize,
    /// Thread count hint; never changes results.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 0, n_returns: 1, n_samples: 10_000, horizon: 1_000, workers: 1 }
    }
}

impl SimConfig {
    fn check(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_returns == 0 || self.horizon == 0 {
            return Err(Error::Config("n_samples, n_returns and horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sampled values of `r^n` with summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalStats {
    pub n_returns: usize,
    pub samples: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub histogram: BTreeMap<u64, u64>,
}

impl EmpiricalStats {
    pub fn from_samples(n_returns: usize, samples: Vec<u64>) -> Self {
        let (mean, variance) = mean_var(samples.iter().map(|&x| x as f64));
        let mut histogram = BTreeMap::new();
        for &s in &samples {
            *histogram.entry(s).or_insert(0) += 1;
        }
        EmpiricalStats { n_returns, samples, mean, variance, histogram }
    }

    /// Whether the sample mean lies within `5σ/√N` of `n/μ(A)` for a predicted σ.
    pub fn mean_consistent(&self, mu_a: f64, sigma_pred: f64) -> bool {
        let n = self.n_returns as f64;
        let se = sigma_pred * n.sqrt() / (self.samples.len() as f64).sqrt();
        (self.mean - n / mu_a).abs() <= 5.0 * se
    }

    /// `P(r^n = k)` estimates.
    pub fn frequencies(&self) -> BTreeMap<u64, f64> {
        let total = self.samples.len() as f64;
        self.histogram.iter().map(|(&k, &c)| (k, c as f64 / total)).collect()
    }
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Cumulative row tables for inversion sampling.
struct Sampler {
    cumulative: Vec<Vec<f64>>,
}

impl Sampler {
    fn new(chain: &GibbsChain) -> Self {
        let n = chain.n_states();
        let cumulative = (0..n).map(|i| cumulative(chain.transition_probs.row(i))).collect();
        Sampler { cumulative }
    }

    #[inline]
    fn step(&self, state: usize, rng: &mut ChaCha8Rng) -> usize {
        pick(&self.cumulative[state], uniform(rng))
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    // Guard the last nonzero bucket against rounding.
    if let Some(last) = p.iter().rposition(|&x| x > 0.0) {
        for c in &mut out[last..] {
            *c = f64::INFINITY;
        }
    }
    out
}

#[inline]
fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn run_indexed<T: Send>(workers: usize, n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

/// Times of the n-th return to the target, started from `π_A/π(A)`.
pub fn sample_return_times(chain: &GibbsChain, target_states: &[usize], cfg: &SimConfig) -> Result<EmpiricalStats> {
    cfg.check()?;
    let sampler = Sampler::new(chain);
    let mut is_target = vec![false; chain.n_states()];
    target_states.iter().for_each(|&s| is_target[s] = true);
    let start_weights: Vec<f64> = target_states.iter().map(|&s| chain.stationary[s]).collect();
    let total: f64 = start_weights.iter().sum();
    let start_cum = cumulative(&start_weights.iter().map(|w| w / total).collect::<Vec<_>>());
    let n = cfg.n_returns as u64;
    let samples = run_indexed(cfg.workers, cfg.n_samples, |i| {
        let mut rng = stream(cfg.seed, i);
        let mut state = target_states[pick(&start_cum, uniform(&mut rng))];
        let mut t = 0u64;
        let mut hits = 0u64;
        while hits < n {
            state = sampler.step(state, &mut rng);
            t += 1;
            if is_target[state] {
                hits += 1;
            }
            if t >= MAX_STEPS {
                return Err(Error::Numeric(format!("sample {i} hit the step cap {MAX_STEPS}")));
            }
        }
        Ok(t)
    })?;
    Ok(EmpiricalStats::from_samples(cfg.n_returns, samples))
}

/// `(1/n) log mean(e^{α r^n})` and the effective sample size `(Σw)²/Σw²`.
pub fn empirical_scgf(stats: &EmpiricalStats, alpha: f64) -> Result<(f64, f64)> {
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha = {alpha} is not finite")));
    }
    let n = stats.samples.len() as f64;
    let shift = stats.samples.iter().map(|&r| alpha * r as f64).fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2) = (0.0, 0.0);
    for &r in &stats.samples {
        let w = (alpha * r as f64 - shift).exp();
        s1 += w;
        s2 += w * w;
    }
    let value = (shift + (s1 / n).ln()) / stats.n_returns as f64;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("empirical scgf at alpha = {alpha} is not finite")));
    }
    Ok((value, s1 * s1 / s2))
}

/// Minimum effective sample size for a trusted exponential-moment estimate.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;

/// The event `{r^n/n ≥ 1/μ(A) + u}` (upper) or `{r^n/n ≤ 1/μ(A) − u}` (lower).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEvent {
    pub side: Side,
    /// `n·(1/μ(A) ± u)`.
    pub threshold: f64,
    slack: f64,
}

impl TailEvent {
    pub fn new(mu_a: f64, u: f64, side: Side, n_returns: usize) -> Result<Self> {
        let mean = 1.0 / mu_a;
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::Domain(format!("deviation size must be positive, got {u}")));
        }
        let x = match side {
            Side::Upper => mean + u,
            Side::Lower => {
                if u >= mean {
                    return Err(Error::Domain(format!("lower deviation u = {u} must be below {mean}")));
                }
                mean - u
            }
        };
        let threshold = x * n_returns as f64;
        // Integer durations sit exactly on rational thresholds; allow for rounding in x·n.
        Ok(TailEvent { side, threshold, slack: 1e-9 * threshold.abs().max(1.0) })
    }

    pub fn contains(&self, r: u64) -> bool {
        match self.side {
            Side::Upper => r as f64 >= self.threshold - self.slack,
            Side::Lower => r as f64 <= self.threshold + self.slack,
        }
    }
}

/// `−(1/n) log` of the frequency of a [`TailEvent`], with the event count. No hits
/// gives `+∞`.
pub fn empirical_tail_rate(stats: &EmpiricalStats, mu_a: f64, u: f64, side: Side) -> Result<(f64, u64)> {
    let event = TailEvent::new(mu_a, u, side, stats.n_returns)?;
    let count = stats.samples.iter().filter(|&&r| event.contains(r)).count() as u64;
    let rate = if count == 0 {
        f64::INFINITY
    } else {
        -(count as f64 / stats.samples.len() as f64).ln() / stats.n_returns as f64
    };
    Ok((rate, count))
}

/// Standard normal CDF via the complementary error function (Chebyshev fit,
/// fractional error below 1.2e-7).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Kolmogorov–Smirnov comparison of standardised return times with N(0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct CltCheck {
    pub ks: f64,
    /// Sorted standardised samples.
    pub standardized: Vec<f64>,
}

impl CltCheck {
    /// `(t, empirical CDF, normal CDF)` on a regular grid of `points` values over `[lo, hi]`.
    pub fn cdf_table(&self, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64, f64)> {
        let n = self.standardized.len() as f64;
        (0..points)
            .map(|i| {
                let t = if points == 1 { lo } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
                let below = self.standardized.partition_point(|&z| z <= t) as f64;
                (t, below / n, normal_cdf(t))
            })
            .collect()
    }
}

/// KS distance between the ECDF of `(r^n − n/μ(A))/(σ√n)` and Φ.
pub fn empirical_clt(stats: &EmpiricalStats, sigma_pred: f64, mu_a: f64) -> Result<CltCheck> {
    if !(sigma_pred > 0.0) {
        return Err(Error::Domain(format!("predicted sigma must be positive, got {sigma_pred}")));
    }
    let n = stats.n_returns as f64;
    let scale = sigma_pred * n.sqrt();
    let centre = n / mu_a;
    let mut z: Vec<f64> = stats.samples.iter().map(|&r| (r as f64 - centre) / scale).collect();
    z.sort_by(f64::total_cmp);
    let m = z.len() as f64;
    let ks = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    Ok(CltCheck { ks, standardized: z })
}

/// Visit counts `N_A^h` over windows of length `h = horizon` from a stationary start.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitCounts {
    pub horizon: usize,
    pub samples: Vec<u64>,
    pub mean: f64,
    /// `Var(N)/horizon`.
    pub sigma2_bar: f64,
}

pub fn visit_counts(chain: &GibbsChain, target_states: &[usize], cfg: &SimConfig) -> Result<VisitCounts> {
    cfg.check()?;
    let sampler = Sampler::new(chain);
    let mut is_target = vec![false; chain.n_states()];
    target_states.iter().for_each(|&s| is_target[s] = true);
    let start_cum = cumulative(&chain.stationary);
    let samples = run_indexed(cfg.workers, cfg.n_samples, |i| {
        let mut rng = stream(cfg.seed, i);
        let mut state = pick(&start_cum, uniform(&mut rng));
        let mut count = u64::from(is_target[state]);
        for _ in 1..cfg.horizon {
            state = sampler.step(state, &mut rng);
            count += u64::from(is_target[state]);
        }
        Ok(count)
    })?;
    let (mean, var) = mean_var(samples.iter().map(|&x| x as f64));
    Ok(VisitCounts { horizon: cfg.horizon, samples, mean, sigma2_bar: var / cfg.horizon as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{instances, Analysis};

    fn full2() -> Analysis {
        Analysis::new(&instances::full_shift(2, &[0]).unwrap()).unwrap()
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-7);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-7);
        assert!((normal_cdf(3.0) - 0.998_650_101_968_37).abs() < 1e-7);
    }

    #[test]
    fn same_seed_same_sample() {
        let an = full2();
        let cfg = SimConfig { seed: 42, n_returns: 3, n_samples: 1, ..Default::default() };
        let a = sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg).unwrap();
        let b = sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let an = full2();
        let cfg = SimConfig { seed: 9, n_returns: 5, n_samples: 2000, workers: 1, ..Default::default() };
        let a = sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg).unwrap();
        let b = sample_return_times(&an.chain, an.recoded.target_blocks(), &SimConfig { workers: 4, ..cfg }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn golden_mean_never_returns_in_one_step() {
        let an = Analysis::new(&instances::golden_mean(&[1]).unwrap()).unwrap();
        let cfg = SimConfig { seed: 1, n_returns: 1, n_samples: 20_000, ..Default::default() };
        let st = sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg).unwrap();
        assert!(st.samples.iter().all(|&t| t >= 2));
    }

    #[test]
    fn scgf_at_zero_is_zero() {
        let st = EmpiricalStats::from_samples(4, vec![4, 7, 9, 12]);
        let (v, ess) = empirical_scgf(&st, 0.0).unwrap();
        assert_eq!(v, 0.0);
        assert!((ess - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scgf_survives_huge_exponents() {
        let st = EmpiricalStats::from_samples(1, vec![1000, 2000]);
        let (v, ess) = empirical_scgf(&st, 5.0).unwrap();
        assert!(v.is_finite() && (v - (10_000.0 - 2f64.ln())).abs() < 1e-6);
        assert!((ess - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_rate_counts_and_infinity() {
        let st = EmpiricalStats::from_samples(2, vec![2, 4, 6, 8]);
        let (rate, count) = empirical_tail_rate(&st, 0.5, 1.0, Side::Upper).unwrap();
        assert_eq!(count, 2);
        assert!((rate - 0.5 * 2f64.ln()).abs() < 1e-12);
        let (rate, count) = empirical_tail_rate(&st, 0.5, 10.0, Side::Upper).unwrap();
        assert_eq!((rate, count), (f64::INFINITY, 0));
        assert!(empirical_tail_rate(&st, 0.5, 2.0, Side::Lower).is_err());
    }

    #[test]
    fn single_return_is_not_normal() {
        let an = full2();
        let cfg = SimConfig { seed: 3, n_returns: 1, n_samples: 5000, ..Default::default() };
        let st = sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg).unwrap();
        assert!(empirical_clt(&st, 2f64.sqrt(), an.mu_a).unwrap().ks > 0.15);
    }

    #[test]
    fn horizon_one_visit_variance_is_bernoulli() {
        let an = Analysis::new(&instances::golden_mean(&[1]).unwrap()).unwrap();
        let cfg = SimConfig { seed: 5, horizon: 1, n_samples: 200_000, ..Default::default() };
        let v = visit_counts(&an.chain, an.recoded.target_blocks(), &cfg).unwrap();
        let expect = an.mu_a * (1.0 - an.mu_a);
        assert!((v.sigma2_bar - expect).abs() < 0.01, "{} vs {expect}", v.sigma2_bar);
    }
}
