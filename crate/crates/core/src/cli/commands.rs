use std::path::{Path, PathBuf};

use super::config::{AnalysisConfig, GridSpec, SimulationConfig};
use super::report::{OutputDir, Report, Scalar, Scalars, SimulationSummary, SystemSummary};
use crate::analysis::Analysis;
use crate::checks::{self, Check, TailRow};
use crate::deviations::{self, Side, VarianceReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::montecarlo::{self, EmpiricalStats, SimConfig, RNG_ALGORITHM};
use crate::oracle::{self, FirstReturnLaw};
use crate::return_op::CgfCurve;

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub clip_grid: bool,
    pub samples: Option<usize>,
    pub workers: Option<usize>,
}

/// Result of one command: the report and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    pub out_dir: PathBuf,
}

const CLT_TABLE: (f64, f64, usize) = (-4.0, 4.0, 161);

struct Session {
    cfg: AnalysisConfig,
    opts: RunOptions,
    an: Analysis,
    variance: VarianceReport,
    notices: Vec<String>,
    out: OutputDir,
    out_dir: PathBuf,
}

impl Session {
    fn open(cfg: AnalysisConfig, opts: RunOptions) -> Result<Self> {
        let (system, notices) = cfg.build_system()?;
        let an = Analysis::new(&system)?;
        let variance = deviations::variance_report(&an)?;
        let out_dir = opts
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let out = OutputDir::create(&out_dir)?;
        Ok(Session { cfg, opts, an, variance, notices, out, out_dir })
    }

    fn simulation(&self) -> Option<SimulationConfig> {
        let mut s = self.cfg.simulation.clone()?;
        if let Some(seed) = self.opts.seed {
            s.seed = seed;
        }
        if let Some(n) = self.opts.samples {
            s.samples = n;
            s.visit_samples = Some(n);
        }
        if let Some(w) = self.opts.workers {
            s.workers = w;
        }
        Some(s)
    }

    /// The simulation block, or the defaults with a notice when the config has none.
    fn simulation_or_default(&mut self) -> SimulationConfig {
        if self.cfg.simulation.is_none() {
            self.notices.push("no simulation block: using default simulation settings".into());
            self.cfg.simulation = Some(SimulationConfig::default());
        }
        self.simulation().expect("set above")
    }

    fn scalars(&self) -> Result<Scalars> {
        let an = &self.an;
        let m = an.recoded.weighted_matrix();
        let pd = linalg::perron(&m)?;
        let tol_p = pd.residual(&m) + 4.0 * f64::EPSILON * pd.rho.ln().abs().max(1.0);
        let tol_pp = tol_p.max(1e-12);
        let s_c = an.operator.s_c();
        let alpha0 = an.alpha0();
        let ev = an.operator.eval(an.pressure())?;
        let lambda_res = linalg::perron(&ev.r)?.residual(&ev.r);
        let (_, slope) = an.operator.scgf_with_slope(0.0)?;
        let mu_tol = an.chain.stationarity_residual() * an.chain.n_states() as f64 + f64::EPSILON;
        let v = &self.variance;
        let sig_tol = (v.sigma2 - v.series_sigma2).abs().max(1e-12);
        let finite_or_zero = |x: f64| if x.is_finite() { x } else { 0.0 };
        Ok(Scalars {
            pressure: Scalar::new(an.pressure(), tol_p),
            restricted_pressure: Scalar::new(s_c, finite_or_zero(tol_pp)),
            s_c: Scalar::new(s_c, finite_or_zero(tol_pp)),
            alpha0: Scalar::new(alpha0, if alpha0.is_finite() { tol_p + tol_pp } else { 0.0 }),
            mu_a: Scalar::new(an.mu_a, mu_tol),
            mean_return: Scalar::new(an.mean_return(), mu_tol / (an.mu_a * an.mu_a)),
            tau: Scalar::exact(an.tau as f64),
            min_mean_return: Scalar::exact(an.operator.min_mean_return()),
            lambda_p: Scalar::new(ev.lambda, lambda_res),
            kac_residual: Scalar::new((slope * an.mu_a - 1.0).abs(), 1e-8),
            sigma2: Scalar::new(v.sigma2, sig_tol),
            sigma2_bar: Scalar::new(v.sigma2_bar, sig_tol * an.mu_a.powi(3)),
        })
    }

    fn report(&self, command: &str) -> Result<Report> {
        let sys = &self.an.system;
        Ok(Report {
            command: command.into(),
            system: SystemSummary {
                n_symbols: sys.n_symbols(),
                potential_depth: sys.potential().depth(),
                target: sys.target().symbols().to_vec(),
                recoded_states: self.an.recoded.block_states().len(),
                period: sys.diagnostics().period,
            },
            scalars: self.scalars()?,
            simulations: Vec::new(),
            checks: Vec::new(),
            deterministic_passed: true,
            stochastic_passed: true,
            notices: Vec::new(),
            files: Vec::new(),
        })
    }

    /// Drops grid points outside the certified domain when clipping is enabled,
    /// otherwise fails on the first one.
    fn clip(&mut self, name: &str, points: Vec<f64>, ok: impl Fn(f64) -> bool, domain: &str) -> Result<Vec<f64>> {
        let bad: Vec<(usize, f64)> = points.iter().copied().enumerate().filter(|&(_, x)| !ok(x)).collect();
        if let Some(&(i, x)) = bad.first() {
            if !self.opts.clip_grid {
                return Err(Error::Domain(format!(
                    "{name} point #{i} = {x} is outside the certified domain ({domain}); rerun with --clip-grid to drop it"
                )));
            }
            self.notices.push(format!("{name}: dropped {} point(s) outside {domain}, first {x}", bad.len()));
        }
        let kept: Vec<f64> = points.into_iter().filter(|&x| ok(x)).collect();
        if kept.is_empty() {
            return Err(Error::Domain(format!("{name}: no point left inside {domain}")));
        }
        Ok(kept)
    }

    fn alpha_grid(&mut self) -> Result<Vec<f64>> {
        let a0 = self.an.alpha0();
        let spec = self.cfg.alpha_grid.unwrap_or(GridSpec {
            min: -2.0,
            max: if a0.is_finite() { (a0 - 0.05).min(2.0) } else { 2.0 },
            count: 41,
        });
        let pts = spec.points("alpha_grid")?;
        let op = self.an.operator.clone();
        self.clip("alpha_grid", pts, |a| op.admits(a), &format!("alpha < alpha0 = {a0}"))
    }

    fn u_grid(&mut self) -> Result<Vec<f64>> {
        let spec = self.cfg.u_grid.unwrap_or(GridSpec {
            min: self.an.operator.min_mean_return(),
            max: 3.0 * self.an.mean_return(),
            count: 41,
        });
        let pts = spec.points("u_grid")?;
        self.clip("u_grid", pts, |u| u > 0.0, "u > 0")
    }

    fn curve(&mut self) -> Result<CgfCurve> {
        let grid = self.alpha_grid()?;
        self.an.operator.cgf_curve(&grid)
    }

    fn sim_config(s: &SimulationConfig, n_returns: usize) -> SimConfig {
        SimConfig { seed: s.seed, n_returns, n_samples: s.samples, horizon: s.horizon, workers: s.workers }
    }

    fn summary(s: &SimulationConfig, stats: &EmpiricalStats) -> SimulationSummary {
        SimulationSummary {
            rng: RNG_ALGORITHM,
            seed: s.seed,
            n: stats.n_returns,
            samples: stats.samples.len(),
            mean: stats.mean,
            variance: stats.variance,
        }
    }

    fn law(&self) -> Result<FirstReturnLaw> {
        oracle::first_return_law(&self.an.chain, self.an.recoded.target_blocks(), deviations::LAW_TOL)
    }

    fn finish(mut self, mut report: Report, exit_on_failure: bool) -> Result<Outcome> {
        report.notices = std::mem::take(&mut self.notices);
        report.refresh_verdicts();
        self.out.report(&mut report)?;
        let exit_code = if exit_on_failure && !report.deterministic_passed { 5 } else { 0 };
        Ok(Outcome { report, exit_code, out_dir: self.out_dir })
    }

    /// Return-time sample at `n` returns with its Kac, exponential-moment and tail checks.
    fn returns_block(&mut self, report: &mut Report, s: &SimulationConfig, law: &FirstReturnLaw) -> Result<Vec<TailRow>> {
        let an = &self.an;
        let target = an.recoded.target_blocks();
        let stats = montecarlo::sample_return_times(&an.chain, target, &Self::sim_config(s, s.n))?;
        report.simulations.push(Self::summary(s, &stats));
        report.checks.push(checks::kac_empirical(&stats, an));
        let exact = checks::exact_reference(law, s.n);
        if exact.is_none() {
            self.notices.push(format!("n = {} exceeds the exact-law range; tail checks use the asymptotic rate", s.n));
        }
        if let Some(ex) = &exact {
            for &alpha in &s.scgf_alpha {
                if alpha <= 0.0 {
                    report.checks.push(checks::empirical_scgf(&stats, ex, law, alpha)?);
                } else {
                    self.notices.push(format!("empirical scgf at alpha = {alpha} > 0 skipped (heavy-tail regime)"));
                }
            }
        }
        let us = if s.tail_u.is_empty() { vec![0.5 * an.mean_return()] } else { s.tail_u.clone() };
        let mut rows = Vec::new();
        for u in us {
            for side in [Side::Upper, Side::Lower] {
                if side == Side::Lower && u >= an.mean_return() {
                    continue;
                }
                let (row, check) = checks::tail(&stats, an, u, side, exact.as_ref())?;
                rows.push(row);
                match check {
                    Some(c) => report.checks.push(c),
                    None => self.notices.push(format!(
                        "tail ({}, u = {u}): {} hits, too few to gate on the asymptotic rate",
                        side.as_str(),
                        row.count
                    )),
                }
            }
        }
        self.out.histogram(&stats.histogram)?;
        self.out.tails(&rows)?;
        Ok(rows)
    }

    fn clt_block(&mut self, report: &mut Report, s: &SimulationConfig) -> Result<()> {
        let an = &self.an;
        let stats =
            montecarlo::sample_return_times(&an.chain, an.recoded.target_blocks(), &Self::sim_config(s, s.clt_n))?;
        report.simulations.push(Self::summary(s, &stats));
        let (fit, cs) = checks::clt(&stats, an, self.variance.sigma2.sqrt())?;
        report.checks.extend(cs);
        let (lo, hi, pts) = CLT_TABLE;
        self.out.clt(&fit.cdf_table(lo, hi, pts))
    }

    fn visits_block(&mut self, report: &mut Report, s: &SimulationConfig) -> Result<()> {
        let an = &self.an;
        let cfg = SimConfig { n_samples: s.visit_samples.unwrap_or(s.samples), ..Self::sim_config(s, 1) };
        let visits = montecarlo::visit_counts(&an.chain, an.recoded.target_blocks(), &cfg)?;
        report.checks.push(checks::visit_variance(&visits, an, self.variance.sigma2));
        Ok(())
    }
}

pub fn analyze(cfg: AnalysisConfig, opts: RunOptions) -> Result<Outcome> {
    let mut s = Session::open(cfg, opts)?;
    let mut report = s.report("analyze")?;
    let curve = s.curve()?;
    report.checks.push(checks::strict_convexity(&curve));
    let u = s.u_grid()?;
    let rate = deviations::rate_function_curve(&s.an.operator, &u)?;
    s.out.scgf(&curve)?;
    s.out.rate(&rate)?;
    s.finish(report, false)
}

pub fn scgf(cfg: AnalysisConfig, opts: RunOptions) -> Result<Outcome> {
    let mut s = Session::open(cfg, opts)?;
    let mut report = s.report("scgf")?;
    let curve = s.curve()?;
    report.checks.push(checks::strict_convexity(&curve));
    s.out.scgf(&curve)?;
    s.finish(report, false)
}

pub fn rate(cfg: AnalysisConfig, opts: RunOptions) -> Result<Outcome> {
    let mut s = Session::open(cfg, opts)?;
    let report = s.report("rate")?;
    let u = s.u_grid()?;
    let rate = deviations::rate_function_curve(&s.an.operator, &u)?;
    s.out.rate(&rate)?;
    s.finish(report, false)
}

pub fn clt(cfg: AnalysisConfig, opts: RunOptions) -> Result<Outcome> {
    let mut s = Session::open(cfg, opts)?;
    let mut report = s.report("clt")?;
    let sim = s.simulation_or_default();
    s.clt_block(&mut report, &sim)?;
    s.finish(report, false)
}

pub fn simulate(cfg: AnalysisConfig, opts: RunOptions) -> Result<Outcome> {
    let mut s = Session::open(cfg, opts)?;
    let mut report = s.report("simulate")?;
    let sim = s.simulation_or_default();
    let law = s.law()?;
    s.returns_block(&mut report, &sim, &law)?;
    s.finish(report, false)
}

/// Every deterministic cross-check, then the stochastic ones when the config has a
/// simulation block. Exit code 5 iff a deterministic check fails.
pub fn validate(cfg: AnalysisConfig, opts: RunOptions) -> Result<Outcome> {
    let mut s = Session::open(cfg, opts)?;
    let mut report = s.report("validate")?;
    let an = &s.an;
    let law = s.law()?;
    let mut det: Vec<Check> = vec![
        checks::chain_consistency(an),
        checks::perron_normalization(an)?,
        checks::pressure_gap(an),
        checks::kac_spectral(an)?,
        checks::kac_oracle(an, &law),
        checks::variance_routes(an)?,
        checks::legendre_zero(an)?,
    ];
    match checks::fine_law(an) {
        Ok(fine) => {
            match checks::conjugacy(an, &fine) {
                Ok(c) => det.push(c),
                Err(e) => s.notices.push(format!("oracle conjugacy not evaluated: {e}")),
            }
            match checks::sandwich(an, &fine) {
                Ok(c) => det.push(c),
                Err(e) => s.notices.push(format!("sandwich bound not evaluated: {e}")),
            }
        }
        Err(e) => s.notices.push(format!("oracle conjugacy and sandwich bound not evaluated: {e}")),
    }
    report.checks.extend(det);
    let curve = s.curve()?;
    report.checks.push(checks::strict_convexity(&curve));
    let u = s.u_grid()?;
    let rate = deviations::rate_function_curve(&s.an.operator, &u)?;
    s.out.scgf(&curve)?;
    s.out.rate(&rate)?;
    match s.simulation() {
        Some(sim) => {
            s.returns_block(&mut report, &sim, &law)?;
            s.clt_block(&mut report, &sim)?;
            s.visits_block(&mut report, &sim)?;
        }
        None => s.notices.push("no simulation block: stochastic checks skipped".into()),
    }
    s.finish(report, true)
}

/// Dispatches a subcommand by name.
pub fn run_named(command: &str, config: &Path, opts: RunOptions) -> Result<Outcome> {
    let cfg = AnalysisConfig::load(config)?;
    match command {
        "analyze" => analyze(cfg, opts),
        "scgf" => scgf(cfg, opts),
        "rate" => rate(cfg, opts),
        "clt" => clt(cfg, opts),
        "simulate" => simulate(cfg, opts),
        "validate" => validate(cfg, opts),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}
