//! Legendre conjugation of Ψ into the large-deviation rate function, the two-sided
//! deviation limits for `r^n/n`, and the CLT variance report.
//!
//! `I(u) = sup_{α<α₀} {uα − Ψ(α)}`. Ψ′ increases from `γ` (the smallest achievable
//! mean cycle length, reached as α → −∞) to +∞ (as α → α₀), so the supremum is
//! attained at the root of `Ψ′(α) = u` for `u > γ`, equals the limit of `γα − Ψ(α)`
//! at `u = γ`, and is +∞ below `γ`.

use rayon::prelude::*;

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::oracle;
use crate::return_op::InducedOperator;

/// Which tail of `r^n/n` a deviation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Side::Upper),
            "lower" => Ok(Side::Lower),
            _ => Err(Error::Config(format!("unknown side {s:?} (expected upper or lower)"))),
        }
    }
}

/// One Legendre point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePoint {
    pub u: f64,
    pub rate: f64,
    /// Maximiser; `-∞` when the supremum is only reached asymptotically.
    pub alpha_star: f64,
}

/// `I(u)` tabulated on a grid of positive abscissae.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFunction {
    pub u_grid: Vec<f64>,
    pub rate: Vec<f64>,
    pub alpha_star: Vec<f64>,
}

const BISECTION_WIDTH: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-12;
const BRACKET_DOUBLINGS: usize = 60;

/// Legendre point `I(u)` with its maximiser.
pub fn rate_function(op: &InducedOperator, u: f64) -> Result<RatePoint> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("rate function needs u > 0, got {u}")));
    }
    let gamma = op.min_mean_return();
    if u < gamma * (1.0 - 1e-12) {
        return Ok(RatePoint { u, rate: f64::INFINITY, alpha_star: f64::NEG_INFINITY });
    }
    if u <= gamma * (1.0 + 1e-12) {
        return Ok(RatePoint { u, rate: boundary_rate(op, gamma)?, alpha_star: f64::NEG_INFINITY });
    }
    let slope = |a: f64| op.scgf_with_slope(a).map(|v| v.1);

    let alpha0 = op.alpha0();
    let mut hi = if alpha0.is_finite() { alpha0 - 1e-4 } else { 1.0 };
    let mut hi_slope = slope(hi)?;
    let mut tries = 0;
    while hi_slope < u {
        tries += 1;
        if tries > BRACKET_DOUBLINGS {
            return Err(Error::Numeric(format!("u = {u} not bracketed: Psi' reaches only {hi_slope} at alpha = {hi}")));
        }
        hi = if alpha0.is_finite() { alpha0 - (alpha0 - hi) / 10.0 } else { hi * 2.0 };
        if alpha0.is_finite() && alpha0 - hi < 1e-7 {
            return Err(Error::Numeric(format!(
                "u = {u} not bracketed: Psi' reaches only {hi_slope} below alpha0 = {alpha0}"
            )));
        }
        hi_slope = slope(hi)?;
    }
    let mut lo = (-1.0_f64).min(hi - 1.0);
    let mut lo_slope = slope(lo)?;
    tries = 0;
    while lo_slope > u {
        tries += 1;
        if tries > BRACKET_DOUBLINGS || lo < -1e6 {
            return Err(Error::Numeric(format!(
                "u = {u} not bracketed: Psi' only falls to {lo_slope} at alpha = {lo} (limit {gamma})"
            )));
        }
        lo *= 2.0;
        lo_slope = slope(lo)?;
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..2 {
        let p = op.point(alpha)?;
        let next = alpha - (p.psi1 - u) / p.psi2;
        if next.is_finite() && next > lo - BISECTION_WIDTH && next < hi + BISECTION_WIDTH {
            alpha = next;
        }
    }
    let (psi, psi1) = op.scgf_with_slope(alpha)?;
    if (psi1 - u).abs() > ROOT_TOL * u.max(1.0) * 100.0 {
        return Err(Error::Numeric(format!("Legendre root at u = {u} has residual {:e}", psi1 - u)));
    }
    Ok(RatePoint { u, rate: u * alpha - psi, alpha_star: alpha })
}

/// `lim_{α→−∞} (γα − Ψ(α))`, evaluated along α = −8, −16, … until it settles.
fn boundary_rate(op: &InducedOperator, gamma: f64) -> Result<f64> {
    let mut prev = f64::NAN;
    let mut alpha = -8.0;
    loop {
        // Keep e^{−S·γ} representable.
        if (op.pressure() - alpha) * gamma > 600.0 {
            return if prev.is_finite() {
                Ok(prev)
            } else {
                Err(Error::Numeric(format!("boundary rate at u = {gamma} not representable")))
            };
        }
        let v = match op.scgf(alpha) {
            Ok(psi) => gamma * alpha - psi,
            Err(Error::Domain(_)) if prev.is_finite() => return Ok(prev),
            Err(e) => return Err(e),
        };
        if (v - prev).abs() <= 1e-13 * v.abs().max(1.0) {
            return Ok(v);
        }
        prev = v;
        alpha *= 2.0;
    }
}

/// `I` on a grid; points are independent and evaluated concurrently.
pub fn rate_function_curve(op: &InducedOperator, u_grid: &[f64]) -> Result<RateFunction> {
    let points: Vec<RatePoint> = u_grid.par_iter().map(|&u| rate_function(op, u)).collect::<Result<_>>()?;
    Ok(RateFunction {
        u_grid: u_grid.to_vec(),
        rate: points.iter().map(|p| p.rate).collect(),
        alpha_star: points.iter().map(|p| p.alpha_star).collect(),
    })
}

/// The limit of `(1/n) log μ_A{r^n/n ≥ 1/μ(A) + u}` (upper) or
/// `{r^n/n ≤ 1/μ(A) − u}` (lower), i.e. `−I(1/μ(A) ± u)`.
pub fn deviation_limit(op: &InducedOperator, mu_a: f64, u: f64, side: Side) -> Result<f64> {
    let mean = 1.0 / mu_a;
    if !(u > 0.0) {
        return Err(Error::Domain(format!("deviation size must be positive, got {u}")));
    }
    let x = match side {
        Side::Upper => mean + u,
        Side::Lower => {
            if u >= mean {
                return Err(Error::Domain(format!(
                    "lower deviation u = {u} must be below the mean return time {mean}"
                )));
            }
            mean - u
        }
    };
    Ok(-rate_function(op, x)?.rate)
}

/// CLT variance by two routes plus the counting variance.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    /// `Ψ″(0)`.
    pub sigma2: f64,
    /// `σ² μ(A)³`.
    pub sigma2_bar: f64,
    pub mu_a: f64,
    /// From the cycle covariance series.
    pub series_sigma2: f64,
    pub series_terms: usize,
    pub series_theta: f64,
}

pub const SERIES_TOL: f64 = 1e-10;
pub const LAW_TOL: f64 = 1e-14;

pub fn variance_report(analysis: &Analysis) -> Result<VarianceReport> {
    let (_, sigma2) = analysis.operator.scgf_derivatives(0.0)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Validation(format!("Psi''(0) = {sigma2} is not positive")));
    }
    let law = oracle::first_return_law(&analysis.chain, analysis.recoded.target_blocks(), LAW_TOL)?;
    let series = oracle::covariance_series(&law, SERIES_TOL)?;
    Ok(VarianceReport {
        sigma2,
        sigma2_bar: sigma2 * analysis.mu_a.powi(3),
        mu_a: analysis.mu_a,
        series_sigma2: series.sigma2,
        series_terms: series.terms,
        series_theta: series.theta,
    })
}
