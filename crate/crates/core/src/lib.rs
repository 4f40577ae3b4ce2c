//! Return-time thermodynamics for subshifts of finite type.
//!
//! Given a transitive subshift of finite type, a finite-range potential and a target
//! made of one-cylinders, this crate computes the scaled cumulant generating function
//! `Ψ(α) = lim (1/n) log E_{μ_A}[exp(α r_A^n)]` of the n-th return time through an
//! induced transfer operator, and derives from it large-deviation rate functions and
//! the CLT variance. Every spectral quantity has an independent check: exact
//! first-return laws ([`oracle`]) and seeded Monte Carlo ([`montecarlo`]).
//!
//! ```
//! use return_thermo::prelude::*;
//!
//! let sys = instances::full_shift(2, &[0]).unwrap();
//! let analysis = Analysis::new(&sys).unwrap();
//! assert!((analysis.operator.scgf(0.0).unwrap()).abs() < 1e-12);
//! ```

pub mod checks;
pub mod cli;
pub mod deviations;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod montecarlo;
pub mod oracle;
pub mod return_op;
pub mod shift;
pub mod thermo;

mod analysis;

pub use analysis::Analysis;
pub use error::{Error, Result};

pub mod prelude {
    pub use crate::analysis::Analysis;
    pub use crate::deviations::{self, RateFunction, Side, VarianceReport};
    pub use crate::error::{Error, Result};
    pub use crate::instances;
    pub use crate::montecarlo::{self, EmpiricalStats, SimConfig};
    pub use crate::oracle::{self, ExactReturnStats, FirstReturnLaw};
    pub use crate::return_op::{self, CgfCurve, InducedOperator, ReturnOperatorEval};
    pub use crate::shift::{self, DepthKPotential, RecodedSystem, SymbolicSystem, TargetSet};
    pub use crate::thermo::{self, GibbsChain};
}
