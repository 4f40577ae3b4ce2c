//! Exact, eigenvalue-free computations on the Markov-additive first-return process.
//!
//! The equilibrium chain observed at its visits to the target is a Markov chain on
//! target states whose transitions carry integer durations. Its kernel
//! `q_a(a′, p)` is computed by iterating the taboo (target-avoiding) block of the
//! chain, truncated at a horizon `t_max` where the omitted probability mass is
//! known exactly: it is the mass still outside the target at `t_max`.
//!
//! Tails of weighted sums beyond the horizon are certified with a positive vector
//! `g` satisfying `P_ĀĀ g ≤ r′ g` for any `r′` above the taboo spectral radius.

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix};
use crate::thermo::GibbsChain;

pub const HORIZON_CAP: usize = 1_000_000;
pub const MAX_RETURNS: usize = 64;
/// Largest `n · t_max · |A|` table the convolution will allocate.
pub const DP_CELL_CAP: usize = 20_000_000;

/// Exact law of (next target state, return duration) from each target state.
#[derive(Clone, Debug)]
pub struct FirstReturnLaw {
    /// `kernel[p − 1][(a, a′)] = q_a(a′, p)` for `p = 1..=t_max`.
    kernel: Vec<Matrix>,
    /// Stationary distribution conditioned on the target.
    start: Vec<f64>,
    /// Per start state, the sub-probability vector over complement states at `t_max`.
    residual: Matrix,
    taboo: Matrix,
    taboo_radius: f64,
    pub t_max: usize,
    /// Largest omitted mass over start states.
    pub tail_bound: f64,
}

/// A quantity with a certified absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certified {
    pub value: f64,
    pub error_bound: f64,
}

impl FirstReturnLaw {
    pub fn n_target(&self) -> usize {
        self.start.len()
    }

    /// `π_A / π(A)`.
    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// `q_a(a′, p)`; zero beyond the horizon.
    pub fn prob(&self, a: usize, next: usize, p: usize) -> f64 {
        if p == 0 || p > self.t_max {
            0.0
        } else {
            self.kernel[p - 1][(a, next)]
        }
    }

    /// Nonzero entries `(a′, p, q)` for start state `a`.
    pub fn entries(&self, a: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let k = self.n_target();
        self.kernel.iter().enumerate().flat_map(move |(i, q)| {
            (0..k).filter_map(move |b| {
                let v = q[(a, b)];
                (v > 0.0).then_some((b, i + 1, v))
            })
        })
    }

    /// Omitted mass per start state.
    pub fn tail_masses(&self) -> Vec<f64> {
        (0..self.n_target()).map(|a| self.residual.row(a).iter().sum()).collect()
    }

    /// Spectral radius of the taboo block `P_ĀĀ`, equal to `exp(−α₀)`.
    pub fn taboo_radius(&self) -> f64 {
        self.taboo_radius
    }

    /// Shortest duration carrying positive probability.
    pub fn min_duration(&self) -> usize {
        self.kernel.iter().position(|q| q.max_abs() > 0.0).map_or(0, |i| i + 1)
    }

    /// `G_a = x_a · g` with `g = (I − P_ĀĀ/r′)⁻¹ 1`, so that the mass outside the
    /// target at `t_max + k` is at most `G_a r′^k`.
    fn tail_envelope(&self, r_prime: f64) -> Result<Vec<f64>> {
        let c = self.taboo.rows();
        if c == 0 || self.residual.max_abs() == 0.0 {
            return Ok(vec![0.0; self.n_target()]);
        }
        let a = Matrix::identity(c).sub(&self.taboo.scale(1.0 / r_prime));
        let g = Lu::new(&a)?.solve(&vec![1.0; c]);
        if g.iter().any(|x| !(*x >= 1.0 - 1e-12)) {
            return Err(Error::Numeric(format!("tail certificate failed for r' = {r_prime}")));
        }
        Ok(self.residual.mul_vec(&g))
    }

    fn moment_ratio(&self) -> f64 {
        (1.0 + self.taboo_radius) / 2.0
    }

    /// Per start state: bounds on the omitted `Σ_{p>T} p^k q_a(·, p)` for k = 0, 1, 2.
    pub fn moment_tails(&self) -> Result<[Vec<f64>; 3]> {
        let r = self.moment_ratio();
        let env = self.tail_envelope(r)?;
        let t1 = (self.t_max + 1) as f64;
        let s = 1.0 - r;
        let f0 = 1.0 / s;
        let f1 = t1 / s + r / (s * s);
        let f2 = t1 * t1 / s + 2.0 * t1 * r / (s * s) + r * (1.0 + r) / (s * s * s);
        Ok([
            env.iter().map(|g| g * f0).collect(),
            env.iter().map(|g| g * f1).collect(),
            env.iter().map(|g| g * f2).collect(),
        ])
    }

    /// Largest `α` for which exponential moments are certifiable: `−log r`.
    pub fn max_certifiable_alpha(&self) -> f64 {
        -self.taboo_radius.ln()
    }

    /// `Q(α)[a, a′] = Σ_{p ≤ T} e^{αp} q_a(a′, p)` and per-row bounds on the omitted part.
    pub fn mgf_matrix(&self, alpha: f64) -> Result<(Matrix, Vec<f64>)> {
        let r = self.taboo_radius;
        if r * alpha.exp() >= 1.0 - 1e-12 {
            return Err(Error::Domain(format!(
                "alpha = {alpha} too close to alpha0 for a certified tail; maximal certifiable alpha is {}",
                self.max_certifiable_alpha()
            )));
        }
        let k = self.n_target();
        let mut q = Matrix::zeros(k, k);
        for (i, kp) in self.kernel.iter().enumerate() {
            let w = (alpha * (i + 1) as f64).exp();
            q = q.add(&kp.scale(w));
        }
        let r_prime = if r > 0.0 { (r * (-alpha).exp()).sqrt() } else { 0.5 * (-alpha).exp() };
        let env = self.tail_envelope(r_prime)?;
        let factor = (alpha * (self.t_max + 1) as f64).exp() / (1.0 - r_prime * alpha.exp());
        Ok((q, env.iter().map(|g| g * factor).collect()))
    }

    /// Mean of the first return time under the conditioned stationary start.
    pub fn mean(&self) -> Certified {
        let error_bound = self.moment_tails().map_or(f64::INFINITY, |t| linalg::dot(&self.start, &t[1]));
        Certified { value: CycleMoments::new(self).mean(), error_bound }
    }
}

/// Computes the first-return law from the equilibrium chain.
///
/// `q_a(a′, 1) = p_{aa′}` and `q_a(a′, p) = [P_AĀ P_ĀĀ^{p−2} P_ĀA]_{aa′}`, iterated as
/// vector–matrix products until the omitted mass is at most `tol`.
pub fn first_return_law(chain: &GibbsChain, target_states: &[usize], tol: f64) -> Result<FirstReturnLaw> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::Config(format!("tolerance {tol} outside (0, 1e-6]")));
    }
    let n = chain.n_states();
    let a_idx = target_states.to_vec();
    let c_idx: Vec<usize> = (0..n).filter(|i| !a_idx.contains(i)).collect();
    let p = &chain.transition_probs;
    let p_aa = p.select(&a_idx, &a_idx);
    let p_ac = p.select(&a_idx, &c_idx);
    let p_ca = p.select(&c_idx, &a_idx);
    let taboo = p.select(&c_idx, &c_idx);
    let (taboo_radius, _) = linalg::reducible_spectral_radius(&taboo)?;

    let mu: f64 = a_idx.iter().map(|&i| chain.stationary[i]).sum();
    let start: Vec<f64> = a_idx.iter().map(|&i| chain.stationary[i] / mu).collect();

    let mut kernel = vec![p_aa];
    let mut outside = p_ac;
    let mut t = 1;
    loop {
        let tail = (0..outside.rows()).map(|a| outside.row(a).iter().sum::<f64>()).fold(0.0, f64::max);
        if tail <= tol {
            return Ok(FirstReturnLaw {
                kernel,
                start,
                residual: outside,
                taboo,
                taboo_radius,
                t_max: t,
                tail_bound: tail,
            });
        }
        if t >= HORIZON_CAP {
            return Err(Error::Numeric(format!(
                "omitted mass {tail:e} still above {tol:e} at horizon cap {HORIZON_CAP}"
            )));
        }
        kernel.push(outside.matmul(&p_ca));
        outside = outside.matmul(&taboo);
        t += 1;
    }
}

/// Embedded-chain moments used for cycle covariances.
#[derive(Clone, Debug)]
pub struct CycleMoments {
    start: Vec<f64>,
    /// Transition matrix of the target-state chain (durations summed out).
    embedded: Matrix,
    /// `Σ_p p q_a(a′, p)`.
    duration_weighted: Matrix,
    /// `E_a[τ]`.
    m1: Vec<f64>,
    /// `E_a[τ²]`.
    m2: Vec<f64>,
}

impl CycleMoments {
    pub fn new(law: &FirstReturnLaw) -> Self {
        let k = law.n_target();
        let mut embedded = Matrix::zeros(k, k);
        let mut dw = Matrix::zeros(k, k);
        let mut m2 = vec![0.0; k];
        for (i, q) in law.kernel.iter().enumerate() {
            let p = (i + 1) as f64;
            embedded = embedded.add(q);
            dw = dw.add(&q.scale(p));
            for (a, m) in m2.iter_mut().enumerate() {
                *m += p * p * q.row(a).iter().sum::<f64>();
            }
        }
        let m1 = dw.mul_vec(&vec![1.0; k]);
        CycleMoments { start: law.start.clone(), embedded, duration_weighted: dw, m1, m2 }
    }

    pub fn mean(&self) -> f64 {
        linalg::dot(&self.start, &self.m1)
    }

    pub fn second_moment(&self) -> f64 {
        linalg::dot(&self.start, &self.m2)
    }

    /// `E[τ^j]` under the stationary start.
    pub fn mean_at(&self, j: usize) -> f64 {
        assert!(j >= 1);
        let mut x = self.start.clone();
        for _ in 1..j {
            x = self.embedded.vec_mul(&x);
        }
        linalg::dot(&x, &self.m1)
    }

    /// `Cov(τ¹, τ^j)` for `j = 1, 2, …`, computed incrementally.
    pub fn covariances(&self) -> impl Iterator<Item = f64> + '_ {
        let mean = self.mean();
        let var = self.second_moment() - mean * mean;
        // x = w D1 P^{j−2}, y = w P^{j−1}.
        let mut x = self.duration_weighted.vec_mul(&self.start);
        let mut y = self.embedded.vec_mul(&self.start);
        std::iter::once(var).chain(std::iter::from_fn(move || {
            let c = linalg::dot(&x, &self.m1) - mean * linalg::dot(&y, &self.m1);
            x = self.embedded.vec_mul(&x);
            y = self.embedded.vec_mul(&y);
            Some(c)
        }))
    }
}

/// `Cov(τ¹, τ^j)` with an error bound from the truncated tails.
pub fn cycle_covariance(law: &FirstReturnLaw, j: usize) -> Result<Certified> {
    if j == 0 {
        return Err(Error::Config("cycle index j must be at least 1".into()));
    }
    let m = CycleMoments::new(law);
    let value = m.covariances().nth(j - 1).unwrap();
    let tails = law.moment_tails()?;
    let e1 = tails[1].iter().copied().fold(0.0, f64::max);
    let e2 = tails[2].iter().copied().fold(0.0, f64::max);
    let big = m.m1.iter().copied().fold(0.0, f64::max) + e1;
    let error_bound = if j == 1 { e2 + 2.0 * big * e1 } else { 4.0 * big * e1 };
    Ok(Certified { value, error_bound })
}

/// Variance of the return-time sums from the cycle covariance series.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSeries {
    /// `E(τ²) − E(τ)² + 2 Σ_{j≥2} Cov(τ¹, τ^j)`.
    pub sigma2: f64,
    pub terms: usize,
    /// Fitted decay ratio of |Cov(τ¹, τ^j)|.
    pub theta: f64,
    pub tail_estimate: f64,
    pub covariances: Vec<f64>,
}

pub const SERIES_MAX_TERMS: usize = 200_000;

/// Sums the covariance series, stopping when a geometric fit of the last terms
/// (safety factor 10) puts the remaining tail below `tol`.
pub fn covariance_series(law: &FirstReturnLaw, tol: f64) -> Result<CovarianceSeries> {
    let m = CycleMoments::new(law);
    let mut covs = Vec::new();
    let mut sum = 0.0;
    let mut theta = 0.0;
    let noise_floor = 64.0 * f64::EPSILON * m.mean().powi(2);
    for (j, c) in m.covariances().enumerate().map(|(i, c)| (i + 1, c)).take(SERIES_MAX_TERMS) {
        covs.push(c);
        if j >= 2 {
            sum += c;
        }
        if j < 4 {
            continue;
        }
        let last = &covs[covs.len() - 3..];
        // Covariances are differences of O(mean²) quantities; below this they are rounding.
        if last.iter().all(|c| c.abs() <= noise_floor) {
            return Ok(finish(&m, sum, j, 0.0, 0.0, covs));
        }
        theta = last
            .windows(2)
            .map(|w| if w[0].abs() > 0.0 { w[1].abs() / w[0].abs() } else { 1.0 })
            .fold(0.0, f64::max);
        if theta < 1.0 {
            let tail = 10.0 * c.abs() * theta / (1.0 - theta);
            if tail < tol {
                return Ok(finish(&m, sum, j, theta, tail, covs));
            }
        }
    }
    Err(Error::Numeric(format!(
        "covariance series did not reach tail {tol:e} in {SERIES_MAX_TERMS} terms (theta = {theta})"
    )))
}

fn finish(m: &CycleMoments, sum: f64, terms: usize, theta: f64, tail: f64, covariances: Vec<f64>) -> CovarianceSeries {
    let mean = m.mean();
    CovarianceSeries {
        sigma2: m.second_moment() - mean * mean + 2.0 * sum,
        terms,
        theta,
        tail_estimate: tail,
        covariances,
    }
}

/// Exact law of `r^n`, the time of the n-th return, started from `π_A/π(A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactReturnStats {
    pub n: usize,
    /// `distribution[k] = P(r^n = k)` with every cycle within the horizon.
    pub distribution: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Upper bound on the mass lost to the horizon truncation (`n · tail_bound`).
    pub omitted_mass: f64,
}

impl ExactReturnStats {
    pub fn support_min(&self) -> usize {
        self.distribution.iter().position(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn total_mass(&self) -> f64 {
        self.distribution.iter().sum()
    }

    /// `E[e^{α r^n}]` with a certified bound on the part lost to truncation.
    pub fn mgf(&self, law: &FirstReturnLaw, alpha: f64) -> Result<Certified> {
        let (q, tails) = law.mgf_matrix(alpha)?;
        let value: f64 =
            self.distribution.iter().enumerate().map(|(k, p)| if *p > 0.0 { p * (alpha * k as f64).exp() } else { 0.0 }).sum();
        let eps = tails.iter().copied().fold(0.0, f64::max);
        let qn = q.norm_inf();
        let n = self.n as i32;
        let error_bound = (qn + eps).powi(n) - qn.powi(n);
        Ok(Certified { value, error_bound })
    }
}

/// Dynamic programming over (target state, accumulated duration).
pub fn exact_return_distribution(law: &FirstReturnLaw, n: usize) -> Result<ExactReturnStats> {
    Ok(exact_return_sequence(law, n)?.pop().unwrap())
}

/// Laws of `r^1, …, r^{n_max}` from one pass of the convolution.
pub fn exact_return_sequence(law: &FirstReturnLaw, n_max: usize) -> Result<Vec<ExactReturnStats>> {
    if n_max == 0 || n_max > MAX_RETURNS {
        return Err(Error::Config(format!("number of returns {n_max} outside 1..={MAX_RETURNS}")));
    }
    if law.tail_bound > 1e-10 {
        return Err(Error::Config(format!("law tail bound {:e} exceeds 1e-10", law.tail_bound)));
    }
    let k = law.n_target();
    let t = law.t_max;
    let len = n_max * t + 1;
    if len.saturating_mul(k) > DP_CELL_CAP {
        return Err(Error::Config(format!("convolution table {k} x {len} exceeds the cap of {DP_CELL_CAP} cells")));
    }
    // cur[b][d]: probability that the j-th return happens at time d in state b.
    let mut cur = vec![vec![0.0; len]; k];
    for b in 0..k {
        for (p, q) in law.kernel.iter().enumerate() {
            cur[b][p + 1] = (0..k).map(|a| law.start[a] * q[(a, b)]).sum();
        }
    }
    let mut out = vec![summarize(law, &cur, 1, t)];
    for j in 1..n_max {
        let mut next = vec![vec![0.0; len]; k];
        for a in 0..k {
            for d in j..=j * t {
                let mass = cur[a][d];
                if mass == 0.0 {
                    continue;
                }
                for (p, q) in law.kernel.iter().enumerate() {
                    for (b, &qv) in q.row(a).iter().enumerate() {
                        if qv != 0.0 {
                            next[b][d + p + 1] += mass * qv;
                        }
                    }
                }
            }
        }
        cur = next;
        out.push(summarize(law, &cur, j + 1, t));
    }
    Ok(out)
}

fn summarize(law: &FirstReturnLaw, cur: &[Vec<f64>], n: usize, t: usize) -> ExactReturnStats {
    let len = n * t + 1;
    let distribution: Vec<f64> = (0..len).map(|d| cur.iter().map(|row| row[d]).sum()).collect();
    let total: f64 = distribution.iter().sum();
    let mean = distribution.iter().enumerate().map(|(d, p)| d as f64 * p).sum::<f64>() / total;
    let variance = distribution.iter().enumerate().map(|(d, p)| (d as f64 - mean).powi(2) * p).sum::<f64>() / total;
    ExactReturnStats { n, distribution, mean, variance, omitted_mass: n as f64 * law.tail_bound }
}

/// `E[e^{α r^n}]` with its certified error; see [`ExactReturnStats::mgf`].
pub fn exact_mgf(law: &FirstReturnLaw, n: usize, alpha: f64) -> Result<Certified> {
    exact_return_distribution(law, n)?.mgf(law, alpha)
}

/// Smallest total duration of `n` consecutive returns, by min-plus iteration over the
/// minimal pairwise first-return durations (starting anywhere in the target).
pub fn min_total_duration(min_durations: &[Vec<Option<usize>>], n: usize) -> usize {
    let k = min_durations.len();
    let mut best = vec![0usize; k];
    for _ in 0..n {
        let mut next = vec![usize::MAX; k];
        for a in 0..k {
            if best[a] == usize::MAX {
                continue;
            }
            for b in 0..k {
                if let Some(d) = min_durations[a][b] {
                    next[b] = next[b].min(best[a] + d);
                }
            }
        }
        best = next;
    }
    best.into_iter().min().unwrap()
}
