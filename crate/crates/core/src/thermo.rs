//! Pressure, the equilibrium Markov chain and the pressure of the target-avoiding
//! subsystem. All logarithms are natural.

use crate::error::{Error, Result};
use crate::linalg::{self, ComponentRadius, Matrix, PerronData};
use crate::shift::RecodedSystem;

/// Perron data of the weighted transfer matrix `M`.
pub fn transfer_perron(recoded: &RecodedSystem) -> Result<PerronData> {
    linalg::perron(&recoded.weighted_matrix())
}

/// Topological pressure `log ρ(M)`.
pub fn pressure(recoded: &RecodedSystem) -> Result<f64> {
    Ok(transfer_perron(recoded)?.rho.ln())
}

/// The equilibrium state as a stationary Markov chain on the recoded states.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsChain {
    pub transition_probs: Matrix,
    pub stationary: Vec<f64>,
    pub pressure: f64,
    pub entropy: f64,
    /// Right Perron vector `v` of `M` (max entry 1); conjugates the induced operator to
    /// the first-return law.
    pub right_vec: Vec<f64>,
}

impl GibbsChain {
    pub fn n_states(&self) -> usize {
        self.stationary.len()
    }

    /// `∫φ dμ = Σ πᵢ pᵢⱼ φ(i, j)`.
    pub fn mean_potential(&self, recoded: &RecodedSystem) -> f64 {
        let n = self.n_states();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = self.transition_probs[(i, j)];
                if p > 0.0 {
                    s += self.stationary[i] * p * recoded.potential2()[(i, j)];
                }
            }
        }
        s
    }

    /// Largest deviation of a row sum from 1.
    pub fn stochasticity_residual(&self) -> f64 {
        (0..self.n_states())
            .map(|i| (self.transition_probs.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `‖πP − π‖∞`.
    pub fn stationarity_residual(&self) -> f64 {
        let pp = self.transition_probs.vec_mul(&self.stationary);
        pp.iter().zip(&self.stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `|h + ∫φ dμ − P|`.
    pub fn variational_residual(&self, recoded: &RecodedSystem) -> f64 {
        (self.entropy + self.mean_potential(recoded) - self.pressure).abs()
    }
}

/// Builds `pᵢⱼ = Mᵢⱼ vⱼ / (ρ vᵢ)` and `πᵢ = uᵢ vᵢ` from the Perron data of `M`.
pub fn gibbs_chain(recoded: &RecodedSystem) -> Result<GibbsChain> {
    let m = recoded.weighted_matrix();
    let pd = linalg::perron(&m)?;
    let n = m.rows();
    let v = &pd.right_vec;
    let p = Matrix::from_fn(n, n, |i, j| m[(i, j)] * v[j] / (pd.rho * v[i]));
    let mut pi: Vec<f64> = pd.left_vec.iter().zip(v).map(|(a, b)| a * b).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    let mut entropy = 0.0;
    for i in 0..n {
        for j in 0..n {
            let q = p[(i, j)];
            if q > 0.0 {
                entropy -= pi[i] * q * q.ln();
            }
        }
    }
    Ok(GibbsChain { transition_probs: p, stationary: pi, pressure: pd.rho.ln(), entropy, right_vec: pd.right_vec })
}

/// Pressure of the subsystem that never visits the target.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedPressure {
    /// `log ρ(M_ĀĀ)`; `-∞` when the complement carries no cycle.
    pub value: f64,
    /// Strongly connected components of the complement (indices into the complement
    /// block list) with their spectral radii.
    pub components: Vec<ComponentRadius>,
}

/// `P′ = log ρ(M restricted to non-target states)`, the maximum over recurrence classes.
///
/// Fails if `P′ < P` does not hold by a margin larger than `1e-12`.
pub fn restricted_pressure(recoded: &RecodedSystem) -> Result<RestrictedPressure> {
    let comp = recoded.complement_blocks();
    if comp.is_empty() {
        return Err(Error::Config("target complement is empty".into()));
    }
    let m = recoded.weighted_matrix();
    let (rho, components) = linalg::reducible_spectral_radius(&m.select(&comp, &comp))?;
    let value = rho.ln();
    let p = linalg::perron(&m)?.rho.ln();
    if !(p - value > 1e-12) {
        return Err(Error::Numeric(format!("pressure gap not strict: P = {p}, P' = {value}")));
    }
    Ok(RestrictedPressure { value, components })
}

/// `μ(A) = Σ_{i∈A} πᵢ` over the given (recoded) target states.
pub fn target_measure(chain: &GibbsChain, target_states: &[usize]) -> f64 {
    target_states.iter().map(|&i| chain.stationary[i]).sum()
}
