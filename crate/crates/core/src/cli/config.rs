//! JSON configuration.
//!
//! ```json
//! {
//!   "system": {
//!     "n_symbols": 2,
//!     "transitions": [[1, 1], [1, 1]],
//!     "potential": {"depth": 1, "values": [{"word": [0], "value": 0.0}, {"word": [1], "value": 0.0}]},
//!     "target": [0]
//!   },
//!   "alpha_grid": {"min": -2.0, "max": 0.6, "count": 27},
//!   "u_grid": {"min": 1.0, "max": 5.0, "count": 9},
//!   "simulation": {"seed": 7, "n": 20, "samples": 100000},
//!   "output": {"dir": "out"}
//! }
//! ```
//!
//! Symbols are 0-based. Admissible words missing from the potential table get the
//! value 0 and a notice in the report; a missing `potential` is the zero potential.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::shift::{admissible_words, DepthKPotential, SymbolicSystem, TargetSet};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub alpha_grid: Option<GridSpec>,
    #[serde(default)]
    pub u_grid: Option<GridSpec>,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_symbols: usize,
    pub transitions: Vec<Vec<u8>>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    pub target: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub depth: usize,
    pub values: Vec<WordValue>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WordValue {
    pub word: Vec<usize>,
    pub value: f64,
}

/// `count` equally spaced points from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self, name: &str) -> Result<Vec<f64>> {
        let GridSpec { min, max, count } = *self;
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!("{name}: bounds must be finite")));
        }
        match count {
            0 => Err(Error::Config(format!("{name}: count must be at least 1"))),
            1 if min == max => Ok(vec![min]),
            1 => Err(Error::Config(format!("{name}: count 1 needs min == max"))),
            _ if !(min < max) => Err(Error::Config(format!("{name}: min {min} must be below max {max}"))),
            _ => Ok((0..count)
                .map(|i| {
                    let t = i as f64 / (count - 1) as f64;
                    min * (1.0 - t) + max * t
                })
                .collect()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: u64,
    /// Number of returns for `simulate` and the tail and exponential-moment checks.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Number of returns for the CLT check.
    #[serde(default = "default_clt_n")]
    pub clt_n: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Window length for visit counts.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Sample count for visit counts; defaults to `samples`.
    #[serde(default)]
    pub visit_samples: Option<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Deviation sizes for the tail table; defaults to half the mean return time.
    #[serde(default)]
    pub tail_u: Vec<f64>,
    #[serde(default = "default_scgf_alpha")]
    pub scgf_alpha: Vec<f64>,
}

fn default_n() -> usize {
    20
}
fn default_clt_n() -> usize {
    2000
}
fn default_samples() -> usize {
    100_000
}
fn default_horizon() -> usize {
    10_000
}
fn default_workers() -> usize {
    1
}
fn default_scgf_alpha() -> Vec<f64> {
    vec![-1.0, -0.2]
}

impl Default for SimulationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Builds the system, returning notices about defaulted potential values.
    pub fn build_system(&self) -> Result<(SymbolicSystem, Vec<String>)> {
        let s = &self.system;
        if s.transitions.len() != s.n_symbols {
            return Err(Error::Config(format!(
                "n_symbols is {} but the transition matrix has {} rows",
                s.n_symbols,
                s.transitions.len()
            )));
        }
        for (i, row) in s.transitions.iter().enumerate() {
            if row.len() != s.n_symbols {
                return Err(Error::Config(format!(
                    "transition row {i} has length {}, expected {}",
                    row.len(),
                    s.n_symbols
                )));
            }
        }
        let mut notices = Vec::new();
        let (depth, given) = match &s.potential {
            None => {
                notices.push("no potential given: using the zero potential".to_string());
                (1, Vec::new())
            }
            Some(p) => (p.depth, p.values.clone()),
        };
        let mut values = BTreeMap::new();
        for (i, wv) in given.iter().enumerate() {
            if !wv.value.is_finite() {
                return Err(Error::Config(format!("potential.values[{i}]: value {} is not finite", wv.value)));
            }
            if values.insert(wv.word.clone(), wv.value).is_some() {
                return Err(Error::Config(format!("potential.values[{i}]: word {:?} given twice", wv.word)));
            }
        }
        let missing: Vec<Vec<usize>> =
            admissible_words(&s.transitions, depth).into_iter().filter(|w| !values.contains_key(w)).collect();
        if !missing.is_empty() && s.potential.is_some() {
            notices.push(format!("{} admissible word(s) missing from the potential set to 0.0", missing.len()));
        }
        values.extend(missing.into_iter().map(|w| (w, 0.0)));
        let potential = DepthKPotential::new(depth, values)?;
        let system = SymbolicSystem::new(s.transitions.clone(), potential, TargetSet::new(s.target.clone())?)?;
        Ok((system, notices))
    }
}
