//! Machine-readable outputs: `report.json` and the CSV tables.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::checks::{ser_f64, Check, CheckKind, TailRow};
use crate::deviations::RateFunction;
use crate::error::{Error, Result};
use crate::return_op::CgfCurve;

/// A value with the tolerance it is known to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scalar {
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tolerance: f64,
}

impl Scalar {
    pub fn new(value: f64, tolerance: f64) -> Self {
        Scalar { value, tolerance }
    }

    pub fn exact(value: f64) -> Self {
        Scalar { value, tolerance: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemSummary {
    pub n_symbols: usize,
    pub potential_depth: usize,
    pub target: Vec<usize>,
    pub recoded_states: usize,
    pub period: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scalars {
    pub pressure: Scalar,
    pub restricted_pressure: Scalar,
    pub s_c: Scalar,
    pub alpha0: Scalar,
    pub mu_a: Scalar,
    pub mean_return: Scalar,
    pub tau: Scalar,
    pub min_mean_return: Scalar,
    pub lambda_p: Scalar,
    pub kac_residual: Scalar,
    pub sigma2: Scalar,
    pub sigma2_bar: Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub rng: &'static str,
    pub seed: u64,
    pub n: usize,
    pub samples: usize,
    #[serde(serialize_with = "ser_f64")]
    pub mean: f64,
    #[serde(serialize_with = "ser_f64")]
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub system: SystemSummary,
    pub scalars: Scalars,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub simulations: Vec<SimulationSummary>,
    pub checks: Vec<Check>,
    pub deterministic_passed: bool,
    pub stochastic_passed: bool,
    pub notices: Vec<String>,
    pub files: Vec<String>,
}

impl Report {
    pub fn refresh_verdicts(&mut self) {
        let all = |k: CheckKind| self.checks.iter().filter(|c| c.kind == k).all(|c| c.passed);
        self.deterministic_passed = all(CheckKind::Deterministic);
        self.stochastic_passed = all(CheckKind::Stochastic);
    }
}

/// Floats with 17 significant digits, so that values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the output files of one run into a directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn scgf(&mut self, curve: &CgfCurve) -> Result<()> {
        let rows = curve.points().map(|p| vec![fmt_f64(p.alpha), fmt_f64(p.psi), fmt_f64(p.psi1), fmt_f64(p.psi2)]);
        self.csv("scgf.csv", &["alpha", "psi", "psi1", "psi2"], rows)
    }

    pub fn rate(&mut self, rate: &RateFunction) -> Result<()> {
        let rows = (0..rate.u_grid.len())
            .map(|i| vec![fmt_f64(rate.u_grid[i]), fmt_f64(rate.rate[i]), fmt_f64(rate.alpha_star[i])]);
        self.csv("rate.csv", &["u", "rate", "alpha_star"], rows)
    }

    pub fn clt(&mut self, table: &[(f64, f64, f64)]) -> Result<()> {
        let rows = table.iter().map(|&(t, e, n)| vec![fmt_f64(t), fmt_f64(e), fmt_f64(n)]);
        self.csv("clt.csv", &["t", "empirical_cdf", "normal_cdf"], rows)
    }

    pub fn tails(&mut self, rows: &[TailRow]) -> Result<()> {
        let rows = rows.iter().map(|r| {
            vec![
                fmt_f64(r.u),
                r.side.as_str().to_string(),
                fmt_f64(r.rate_estimate),
                r.count.to_string(),
                fmt_f64(r.predicted_rate),
            ]
        });
        self.csv("tails.csv", &["u", "side", "rate_estimate", "count", "predicted_rate"], rows)
    }

    pub fn histogram(&mut self, hist: &std::collections::BTreeMap<u64, u64>) -> Result<()> {
        let rows = hist.iter().map(|(r, c)| vec![r.to_string(), c.to_string()]);
        self.csv("histogram.csv", &["r", "count"], rows)
    }

    /// Writes `report.json` last, listing every file of the run.
    pub fn report(&mut self, report: &mut Report) -> Result<()> {
        self.written.push("report.json".to_string());
        report.files = self.written.clone();
        let path = self.dir.join("report.json");
        let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, std::f64::consts::PI, -1e-300, 6.02214076e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
