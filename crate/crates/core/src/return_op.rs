//! The induced first-return transfer operator as a finite matrix over target states.
//!
//! With `W = e^{−S} M` split into target (`A`) and complement (`Ā`) blocks,
//!
//! ```text
//! R(S) = W_AA + W_AĀ (I − W_ĀĀ)⁻¹ W_ĀA = Σ_{n≥1} e^{−nS} F_n
//! ```
//!
//! where `F_n` collects the weights `exp(Birkhoff sum)` of first-return paths of
//! length `n`. The series converges iff `S > S_c = P′`, the pressure of the
//! target-avoiding subsystem. The Perron root `λ_S` of `R(S)` equals 1 at `S = P`
//! and the scaled cumulant generating function of the return times is
//! `Ψ(α) = log λ_{P−α}` for `α < α₀ = P − S_c`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix};
use crate::shift::RecodedSystem;
use crate::thermo;

/// Evaluations are refused unless `ρ(e^{−S} M_ĀĀ) ≤ 1 − CRITICAL_MARGIN`.
pub const CRITICAL_MARGIN: f64 = 1e-8;
/// Half the natural-log width of the positive normal doubles.
const EXPONENT_RANGE: f64 = 350.0;

/// `S_c` together with the pressure and `α₀ = P − S_c` (infinite when the complement
/// carries no cycle).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalParameter {
    pub s_c: f64,
    pub alpha0: f64,
    pub pressure: f64,
}

pub fn critical_parameter(recoded: &RecodedSystem) -> Result<CriticalParameter> {
    let pressure = thermo::pressure(recoded)?;
    let s_c = thermo::restricted_pressure(recoded)?.value;
    Ok(CriticalParameter { s_c, alpha0: pressure - s_c, pressure })
}

/// `R(S)` and its Perron data.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnOperatorEval {
    pub s: f64,
    pub r: Matrix,
    /// `dR/dS = −Σ n e^{−nS} F_n`.
    pub r_prime: Matrix,
    pub lambda: f64,
    /// Right Perron vector (max entry 1).
    pub h_vec: Vec<f64>,
    /// Left Perron vector, `m_vec · h_vec = 1`.
    pub m_vec: Vec<f64>,
    /// 1-norm condition number of `I − W_ĀĀ`.
    pub resolvent_condition: f64,
}

impl ReturnOperatorEval {
    /// `dλ/dS = m R′ h / (m·h)`.
    pub fn lambda_prime(&self) -> f64 {
        linalg::dot(&self.m_vec, &self.r_prime.mul_vec(&self.h_vec)) / linalg::dot(&self.m_vec, &self.h_vec)
    }

    /// `max h / min h`.
    pub fn h_ratio(&self) -> f64 {
        let max = self.h_vec.iter().copied().fold(f64::MIN, f64::max);
        let min = self.h_vec.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    /// Stationary weights `mᵢ hᵢ` of the induced operator (sum to 1).
    pub fn nu_weights(&self) -> Vec<f64> {
        self.m_vec.iter().zip(&self.h_vec).map(|(a, b)| a * b).collect()
    }
}

/// Ψ and its first two derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScgfPoint {
    pub alpha: f64,
    pub psi: f64,
    pub psi1: f64,
    pub psi2: f64,
}

/// Ψ, Ψ′ and Ψ″ tabulated on an increasing grid below `α₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct CgfCurve {
    pub alpha_grid: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    pub alpha0: f64,
}

impl CgfCurve {
    pub fn points(&self) -> impl Iterator<Item = ScgfPoint> + '_ {
        (0..self.alpha_grid.len()).map(|i| ScgfPoint {
            alpha: self.alpha_grid[i],
            psi: self.psi[i],
            psi1: self.psi1[i],
            psi2: self.psi2[i],
        })
    }
}

/// The induced operator of one system, with the block decomposition and the
/// critical data cached so that curves can be evaluated cheaply.
#[derive(Clone, Debug)]
pub struct InducedOperator {
    m: Matrix,
    target: Vec<usize>,
    complement: Vec<usize>,
    critical: CriticalParameter,
    min_durations: Vec<Vec<Option<usize>>>,
}

impl InducedOperator {
    pub fn new(recoded: &RecodedSystem) -> Result<Self> {
        Ok(InducedOperator {
            m: recoded.weighted_matrix(),
            target: recoded.target_blocks().to_vec(),
            complement: recoded.complement_blocks(),
            critical: critical_parameter(recoded)?,
            min_durations: recoded.min_return_durations(),
        })
    }

    pub fn critical(&self) -> CriticalParameter {
        self.critical
    }

    pub fn pressure(&self) -> f64 {
        self.critical.pressure
    }

    pub fn alpha0(&self) -> f64 {
        self.critical.alpha0
    }

    pub fn s_c(&self) -> f64 {
        self.critical.s_c
    }

    pub fn n_target(&self) -> usize {
        self.target.len()
    }

    /// Shortest first-return duration between each pair of target states.
    pub fn min_durations(&self) -> &[Vec<Option<usize>>] {
        &self.min_durations
    }

    /// τ(A) on the recoded system.
    pub fn minimal_return_time(&self) -> usize {
        self.min_durations.iter().flatten().flatten().copied().min().expect("irreducible system returns")
    }

    /// Minimum over cycles of the induced graph of (total duration)/(number of returns):
    /// the limit of Ψ′(α) as α → −∞, i.e. the smallest achievable return-time average.
    pub fn min_mean_return(&self) -> f64 {
        min_cycle_mean(&self.min_durations)
    }

    /// `ρ(e^{−S} M_ĀĀ) = e^{S_c − S}`.
    pub fn avoid_radius(&self, s: f64) -> f64 {
        (self.critical.s_c - s).exp()
    }

    pub fn eval(&self, s: f64) -> Result<ReturnOperatorEval> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("parameter S = {s} is not finite")));
        }
        let radius = self.avoid_radius(s);
        if radius > 1.0 - CRITICAL_MARGIN {
            return Err(Error::Domain(format!(
                "parameter at or below critical value S_c: S = {s}, S_c = {}, ρ(e^-S M_ĀĀ) = {radius}",
                self.critical.s_c
            )));
        }
        let w = self.m.scale((-s).exp());
        let (a, c) = (&self.target, &self.complement);
        let w_aa = w.select(a, a);
        let b = w.select(a, c);
        let cc = w.select(c, a);
        let i_minus_d = Matrix::identity(c.len()).sub(&w.select(c, c));
        let lu = Lu::new(&i_minus_d)?;
        let kc = nonnegative(lu.solve_matrix(&cc));
        let kkc = nonnegative(lu.solve_matrix(&kc));
        let bkc = b.matmul(&kc);
        let r = w_aa.add(&bkc);
        let r_prime = w_aa.add(&bkc).add(&b.matmul(&kkc)).scale(-1.0);
        let pd = linalg::perron(&r).map_err(|e| self.range_error(s, &r).unwrap_or(e))?;
        Ok(ReturnOperatorEval {
            s,
            r,
            r_prime,
            lambda: pd.rho,
            h_vec: pd.right_vec,
            m_vec: pd.left_vec,
            resolvent_condition: linalg::condition_number(&i_minus_d)?,
        })
    }

    /// Domain error when `S` pushes first-return weights past the floating-point range:
    /// an entry of `r` rounded to zero, or weights `e^{−S·d}` spread over more than the
    /// exponent range.
    fn range_error(&self, s: f64, r: &Matrix) -> Option<Error> {
        let durations = || self.min_durations.iter().flatten().flatten().copied();
        let spread = (durations().max()? - durations().min()?) as f64;
        let zero = self.min_durations.iter().enumerate().find_map(|(i, row)| {
            (0..row.len()).find(|&j| row[j].is_some() && r[(i, j)] == 0.0).map(|j| (i, j))
        });
        let detail = match zero {
            Some((i, j)) => format!("first-return weight {i} -> {j} underflows"),
            None if s.abs() * spread > EXPONENT_RANGE => format!("first-return weights span e^{:.0}", s.abs() * spread),
            None => return None,
        };
        Some(Error::Domain(format!("{detail} at S = {s}; parameter beyond floating-point range")))
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha = {alpha} is not finite")));
        }
        let a0 = self.critical.alpha0;
        if alpha >= a0 - CRITICAL_MARGIN {
            return Err(Error::Domain(format!("alpha = {alpha} is not below alpha0 = {a0} (margin {CRITICAL_MARGIN})")));
        }
        Ok(())
    }

    /// `Ψ(α) = log λ_{P−α}`.
    pub fn scgf(&self, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        Ok(self.eval(self.pressure() - alpha)?.lambda.ln())
    }

    /// `(Ψ(α), Ψ′(α))` from one operator evaluation.
    pub fn scgf_with_slope(&self, alpha: f64) -> Result<(f64, f64)> {
        self.check_alpha(alpha)?;
        let ev = self.eval(self.pressure() - alpha)?;
        let slope = -ev.lambda_prime() / ev.lambda;
        if slope.is_nan() {
            if let Some(e) = self.range_error(ev.s, &ev.r) {
                return Err(e);
            }
        }
        if !(slope > 0.0) {
            return Err(Error::Numeric(format!("non-positive slope Psi'({alpha}) = {slope}")));
        }
        Ok((ev.lambda.ln(), slope))
    }

    /// `(Ψ′(α), Ψ″(α))`; Ψ″ is a Richardson-extrapolated central difference of the
    /// analytic Ψ′.
    pub fn scgf_derivatives(&self, alpha: f64) -> Result<(f64, f64)> {
        let p = self.point(alpha)?;
        Ok((p.psi1, p.psi2))
    }

    /// Whether [`point`](Self::point) accepts `alpha`, difference step included.
    pub fn admits(&self, alpha: f64) -> bool {
        alpha.is_finite() && alpha + difference_step(alpha) < self.alpha0() - CRITICAL_MARGIN
    }

    pub fn point(&self, alpha: f64) -> Result<ScgfPoint> {
        let (psi, psi1) = self.scgf_with_slope(alpha)?;
        let h = difference_step(alpha);
        if alpha + h >= self.alpha0() - CRITICAL_MARGIN {
            return Err(Error::Domain(format!(
                "alpha = {alpha} is within the difference step {h} of alpha0 = {}; use a smaller alpha",
                self.alpha0()
            )));
        }
        let slope = |x: f64| self.scgf_with_slope(x).map(|v| v.1);
        let d = |step: f64| -> Result<f64> { Ok((slope(alpha + step)? - slope(alpha - step)?) / (2.0 * step)) };
        let psi2 = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
        Ok(ScgfPoint { alpha, psi, psi1, psi2 })
    }

    /// Evaluates Ψ, Ψ′, Ψ″ on an increasing grid and checks strict convexity.
    pub fn cgf_curve(&self, alpha_grid: &[f64]) -> Result<CgfCurve> {
        if alpha_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("alpha grid must be strictly increasing".into()));
        }
        let results: Vec<Result<ScgfPoint>> = alpha_grid.par_iter().map(|&a| self.point(a)).collect();
        let bad: Vec<String> = results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("#{i} (alpha = {}): {e}", alpha_grid[i])))
            .collect();
        if !bad.is_empty() {
            let domain = results.iter().any(|r| matches!(r, Err(Error::Domain(_))));
            let msg = format!("{} grid point(s) failed: {}", bad.len(), bad.join("; "));
            return Err(if domain { Error::Domain(msg) } else { Error::Numeric(msg) });
        }
        let points: Vec<ScgfPoint> = results.into_iter().map(|r| r.unwrap()).collect();
        let nonconvex: Vec<usize> = points.iter().enumerate().filter(|(_, p)| !(p.psi2 > 0.0)).map(|(i, _)| i).collect();
        if !nonconvex.is_empty() {
            return Err(Error::Validation(format!("Psi'' is not positive at grid indices {nonconvex:?}")));
        }
        if let Some(i) = points.windows(2).position(|w| !(w[1].psi1 > w[0].psi1)) {
            return Err(Error::Validation(format!("Psi' not increasing between grid indices {i} and {}", i + 1)));
        }
        Ok(CgfCurve {
            alpha_grid: alpha_grid.to_vec(),
            psi: points.iter().map(|p| p.psi).collect(),
            psi1: points.iter().map(|p| p.psi1).collect(),
            psi2: points.iter().map(|p| p.psi2).collect(),
            alpha0: self.alpha0(),
        })
    }
}

fn difference_step(alpha: f64) -> f64 {
    (alpha.abs() * 1e-7).max(1e-5)
}

fn nonnegative(m: Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)].max(0.0))
}

/// Minimum cycle mean of a weighted digraph given as a weight table (`None` = no edge),
/// by Karp's algorithm.
pub fn min_cycle_mean(w: &[Vec<Option<usize>>]) -> f64 {
    let n = w.len();
    let inf = f64::INFINITY;
    // d[k][v]: minimum weight of a walk with exactly k edges ending at v (any start).
    let mut d = vec![vec![inf; n]; n + 1];
    d[0].iter_mut().for_each(|x| *x = 0.0);
    for k in 1..=n {
        for u in 0..n {
            if d[k - 1][u] == inf {
                continue;
            }
            for v in 0..n {
                if let Some(c) = w[u][v] {
                    let cand = d[k - 1][u] + c as f64;
                    if cand < d[k][v] {
                        d[k][v] = cand;
                    }
                }
            }
        }
    }
    let mut best = inf;
    for v in 0..n {
        if d[n][v] == inf {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| d[k][v] < inf)
            .map(|k| (d[n][v] - d[k][v]) / (n - k) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        best = best.min(worst);
    }
    best
}

/// `R(S)` for a system; see [`InducedOperator::eval`].
pub fn return_operator_eval(recoded: &RecodedSystem, s: f64) -> Result<ReturnOperatorEval> {
    InducedOperator::new(recoded)?.eval(s)
}

/// `Ψ(α)`; see [`InducedOperator::scgf`].
pub fn scgf(recoded: &RecodedSystem, alpha: f64) -> Result<f64> {
    InducedOperator::new(recoded)?.scgf(alpha)
}

/// `(Ψ′(α), Ψ″(α))`; see [`InducedOperator::scgf_derivatives`].
pub fn scgf_derivatives(recoded: &RecodedSystem, alpha: f64) -> Result<(f64, f64)> {
    InducedOperator::new(recoded)?.scgf_derivatives(alpha)
}

/// See [`InducedOperator::cgf_curve`].
pub fn cgf_curve(recoded: &RecodedSystem, alpha_grid: &[f64]) -> Result<CgfCurve> {
    InducedOperator::new(recoded)?.cgf_curve(alpha_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::{recode_higher_block, DepthKPotential, SymbolicSystem, TargetSet};

    const LN2: f64 = std::f64::consts::LN_2;

    fn phi() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    fn op(t: Vec<Vec<u8>>, target: usize) -> InducedOperator {
        let n = t.len();
        let s = SymbolicSystem::new(t, DepthKPotential::zero(n), TargetSet::single(target)).unwrap();
        InducedOperator::new(&recode_higher_block(&s)).unwrap()
    }

    fn full2() -> InducedOperator {
        op(vec![vec![1, 1], vec![1, 1]], 0)
    }

    fn golden() -> InducedOperator {
        op(vec![vec![1, 1], vec![1, 0]], 1)
    }

    #[test]
    fn critical_parameter_examples() {
        let c = full2().critical();
        assert_eq!(c.s_c, 0.0);
        assert!((c.alpha0 - LN2).abs() < 1e-15);
        let c = op(vec![vec![1; 3]; 3], 0).critical();
        assert!((c.s_c - LN2).abs() < 1e-14);
        assert!((c.alpha0 - 1.5f64.ln()).abs() < 1e-12);
        let c = golden().critical();
        assert!(c.s_c.abs() < 1e-15);
        assert!((c.alpha0 - 0.4812118).abs() < 1e-7);
    }

    #[test]
    fn eval_examples() {
        let o = full2();
        let e = o.eval(LN2).unwrap();
        assert!((e.r[(0, 0)] - 1.0).abs() < 1e-14 && (e.lambda - 1.0).abs() < 1e-14);
        assert!((o.eval(4f64.ln()).unwrap().lambda - 1.0 / 3.0).abs() < 1e-14);
        let g = golden();
        let p = g.pressure();
        let e = g.eval(p).unwrap();
        let expect = (-2.0 * p).exp() / (1.0 - (-p).exp());
        assert!((e.r[(0, 0)] - expect).abs() < 1e-14);
        assert!((e.lambda - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eval_rejects_subcritical_parameter() {
        let err = full2().eval(0.0).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("critical")));
        assert!(full2().eval(-1.0).is_err());
    }

    #[test]
    fn scgf_examples() {
        let o = full2();
        assert!(o.scgf(0.0).unwrap().abs() < 1e-14);
        assert!((o.scgf(1.5f64.ln()).unwrap() - 3f64.ln()).abs() < 1e-13);
        let g = golden();
        assert!((g.scgf(g.pressure() - LN2).unwrap() + LN2).abs() < 1e-13);
        let err = o.scgf(LN2).unwrap_err();
        assert!(err.to_string().contains("alpha0"));
    }

    #[test]
    fn derivative_examples() {
        let (d1, d2) = full2().scgf_derivatives(0.0).unwrap();
        assert!((d1 - 2.0).abs() < 1e-12 && (d2 - 2.0).abs() < 1e-9);
        let (d1, d2) = golden().scgf_derivatives(0.0).unwrap();
        assert!((d1 - (phi() + 2.0)).abs() < 1e-12);
        assert!((d2 - phi().powi(3)).abs() < 1e-9);
        let (d1, _) = full2().scgf_derivatives(1.5f64.ln()).unwrap();
        assert!((d1 - 4.0).abs() < 1e-11);
    }

    #[test]
    fn curve_examples() {
        let o = full2();
        let c = o.cgf_curve(&[-1.0, 0.0, 0.3]).unwrap();
        let closed = |a: f64| a - (2.0 - a.exp()).ln();
        for (a, p) in c.alpha_grid.iter().zip(&c.psi) {
            assert!((p - closed(*a)).abs() < 1e-13);
        }
        assert!((c.psi[0] + 1.48988).abs() < 1e-5 && (c.psi[2] - 0.73057).abs() < 1e-5);
        let single = o.cgf_curve(&[0.0]).unwrap();
        assert!(single.psi[0].abs() < 1e-14 && (single.psi1[0] - 2.0).abs() < 1e-12);
        let a0 = o.alpha0();
        let near = o.cgf_curve(&[a0 - 1e-1, a0 - 1e-2]).unwrap();
        assert!(near.psi1[1] > near.psi1[0]);
    }

    #[test]
    fn curve_reports_offending_indices() {
        let o = full2();
        let err = o.cgf_curve(&[0.0, 0.5, 0.7, 0.8]).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Domain(_)));
        assert!(msg.contains("#2") && msg.contains("#3") && !msg.contains("#1 "));
    }

    #[test]
    fn karp_min_cycle_mean() {
        let w = vec![vec![None, Some(1)], vec![Some(5), None]];
        assert_eq!(min_cycle_mean(&w), 3.0);
        let w = vec![vec![Some(4), Some(1)], vec![Some(2), None]];
        assert_eq!(min_cycle_mean(&w), 1.5);
    }
}
