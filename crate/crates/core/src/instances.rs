//! Ready-made systems: full shifts, the golden-mean shift and random transitive
//! instances for property tests.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::shift::{DepthKPotential, SymbolicSystem, TargetSet};

/// Full shift on `n` symbols with zero potential.
pub fn full_shift(n: usize, target: &[usize]) -> Result<SymbolicSystem> {
    SymbolicSystem::new(vec![vec![1; n]; n], DepthKPotential::zero(n), TargetSet::new(target.to_vec())?)
}

/// Golden-mean shift (`1 → 1` forbidden, 0-based) with zero potential.
pub fn golden_mean(target: &[usize]) -> Result<SymbolicSystem> {
    SymbolicSystem::new(golden_mean_matrix(), DepthKPotential::zero(2), TargetSet::new(target.to_vec())?)
}

pub fn golden_mean_matrix() -> Vec<Vec<u8>> {
    vec![vec![1, 1], vec![1, 0]]
}

/// `(1 + √5)/2`.
pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Shape of random instances.
#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub max_symbols: usize,
    pub max_depth: usize,
    pub potential_range: f64,
    /// Probability that an off-diagonal transition is allowed.
    pub density: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { max_symbols: 8, max_depth: 3, potential_range: 1.0, density: 0.5 }
    }
}

/// A random transitive and aperiodic system: between 2 and `max_symbols` symbols,
/// depth between 1 and `max_depth`, potential values uniform in
/// `[-potential_range, potential_range]` and a random proper target.
pub fn random_instance(spec: RandomSpec, seed: u64) -> SymbolicSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=spec.max_symbols);
        let depth = rng.random_range(1..=spec.max_depth);
        let t: Vec<Vec<u8>> =
            (0..n).map(|_| (0..n).map(|_| u8::from(rng.random_bool(spec.density))).collect()).collect();
        let n_target = rng.random_range(1..n);
        let mut symbols: Vec<usize> = (0..n).collect();
        for i in 0..n_target {
            let j = rng.random_range(i..n);
            symbols.swap(i, j);
        }
        symbols.truncate(n_target);
        let Ok(target) = TargetSet::new(symbols) else { continue };
        let words = crate::shift::admissible_words(&t, depth);
        let r = spec.potential_range;
        let values = words.into_iter().map(|w| (w, rng.random_range(-r..=r))).collect();
        let Ok(pot) = DepthKPotential::new(depth, values) else { continue };
        match SymbolicSystem::new(t, pot, target) {
            Ok(sys) if sys.diagnostics().aperiodic => return sys,
            _ => continue,
        }
    }
}
