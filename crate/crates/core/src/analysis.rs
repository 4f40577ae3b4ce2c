use crate::error::Result;
use crate::return_op::InducedOperator;
use crate::shift::{self, RecodedSystem, SymbolicSystem};
use crate::thermo::{self, GibbsChain};

/// Everything derived once from a system: the recoding, the equilibrium chain, the
/// induced operator, `μ(A)` and `τ(A)`.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub system: SymbolicSystem,
    pub recoded: RecodedSystem,
    pub chain: GibbsChain,
    pub operator: InducedOperator,
    pub mu_a: f64,
    pub tau: usize,
}

impl Analysis {
    pub fn new(system: &SymbolicSystem) -> Result<Self> {
        let recoded = shift::recode_higher_block(system);
        let chain = thermo::gibbs_chain(&recoded)?;
        let operator = InducedOperator::new(&recoded)?;
        let mu_a = thermo::target_measure(&chain, recoded.target_blocks());
        Ok(Analysis { system: system.clone(), tau: shift::minimal_return_time(system), recoded, chain, operator, mu_a })
    }

    pub fn pressure(&self) -> f64 {
        self.operator.pressure()
    }

    pub fn alpha0(&self) -> f64 {
        self.operator.alpha0()
    }

    /// Mean return time `1/μ(A)`.
    pub fn mean_return(&self) -> f64 {
        1.0 / self.mu_a
    }

    /// Stationary distribution conditioned on the target, over target blocks.
    pub fn target_start(&self) -> Vec<f64> {
        self.recoded.target_blocks().iter().map(|&i| self.chain.stationary[i] / self.mu_a).collect()
    }
}
