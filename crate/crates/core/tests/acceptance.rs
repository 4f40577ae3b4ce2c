//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use return_thermo::checks;
use return_thermo::instances::{self, RandomSpec};
use return_thermo::prelude::*;

const N_RANDOM: u64 = 50;
const N_CONJUGACY: usize = 20;
const MC_SEED: u64 = 0x5eed_2024;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn timed(budget: Option<f64>, f: impl FnOnce() -> Result<Verdict>) -> Verdict {
    let start = Instant::now();
    let v = f().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
    let secs = start.elapsed().as_secs_f64();
    match budget {
        Some(b) => verdict(v.passed && secs < b, format!("{}; {secs:.2} s (budget {b} s)", v.detail)),
        None => verdict(v.passed, format!("{}; {secs:.2} s", v.detail)),
    }
}

fn random_analyses() -> Result<Vec<Analysis>> {
    (0..N_RANDOM).map(|s| Analysis::new(&instances::random_instance(RandomSpec::default(), s))).collect()
}

fn full2() -> Result<Analysis> {
    Analysis::new(&instances::full_shift(2, &[0])?)
}

fn golden() -> Result<Analysis> {
    Analysis::new(&instances::golden_mean(&[1])?)
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn upper_limit(an: &Analysis) -> f64 {
    if an.alpha0().is_finite() {
        an.alpha0() - 0.05
    } else {
        2.0
    }
}

fn perron_normalization(rand: &[Analysis]) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for an in rand {
        worst = worst.max(checks::perron_normalization(an)?.measured);
    }
    Ok(verdict(worst <= 1e-10, format!("max |lambda_P - 1| = {worst:.2e} over {} instances (limit 1e-10)", rand.len())))
}

fn kac(rand: &[Analysis]) -> Result<Verdict> {
    let (mut spectral, mut oracle_ok, mut oracle_worst): (f64, bool, f64) = (0.0, true, 0.0);
    for an in rand {
        spectral = spectral.max(checks::kac_spectral(an)?.measured);
        let law = oracle::first_return_law(&an.chain, an.recoded.target_blocks(), 1e-14)?;
        let c = checks::kac_oracle(an, &law);
        oracle_ok &= c.passed;
        oracle_worst = oracle_worst.max(c.measured / c.tolerance);
    }
    Ok(verdict(
        spectral <= 1e-8 && oracle_ok,
        format!(
            "max |Psi'(0) mu(A) - 1| = {spectral:.2e} (limit 1e-8); oracle mean error at most {:.1}% of its certified bound",
            100.0 * oracle_worst
        ),
    ))
}

fn closed_forms() -> Result<Verdict> {
    let f = full2()?;
    let g = golden()?;
    let p = g.pressure();
    let mut worst: f64 = 0.0;
    for a in grid(-3.0, upper_limit(&f), 20) {
        worst = worst.max((f.operator.scgf(a)? - (a - (2.0 - a.exp()).ln())).abs());
    }
    for a in grid(-3.0, upper_limit(&g), 20) {
        worst = worst.max((g.operator.scgf(a)? - (2.0 * (a - p) - (1.0 - (a - p).exp()).ln())).abs());
    }
    Ok(verdict(worst <= 1e-10, format!("max deviation {worst:.2e} over 2 x 20 points (limit 1e-10)")))
}

fn pressure_gap(rand: &[Analysis]) -> Result<Verdict> {
    let named = [full2()?, golden()?];
    let gaps: Vec<_> = rand.iter().chain(&named).map(checks::pressure_gap).collect();
    let all = gaps.iter().all(|c| c.passed);
    let min_gap = gaps.iter().map(|c| c.measured).fold(f64::INFINITY, f64::min);
    let f3 = Analysis::new(&instances::full_shift(3, &[0])?)?;
    let err = (f3.alpha0() - 1.5f64.ln()).abs();
    Ok(verdict(
        all && err <= 1e-12,
        format!("smallest P - P' = {min_gap:.3e} over {} systems; full 3-shift |alpha0 - ln 3/2| = {err:.1e} (limit 1e-12)", gaps.len()),
    ))
}

fn sandwich() -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, an) in [("full 2-shift", full2()?), ("golden mean", golden()?)] {
        let c = checks::sandwich(&an, &checks::fine_law(&an)?)?;
        ok &= c.passed;
        parts.push(format!("{name}: max c_n = {:.2e} vs 2 c_3 + 1e-9 = {:.2e}", c.measured, c.tolerance));
    }
    Ok(verdict(ok, parts.join("; ")))
}

fn convexity(rand: &[Analysis]) -> Result<Verdict> {
    let mut min: f64 = f64::INFINITY;
    for an in rand {
        let curve = an.operator.cgf_curve(&grid(-5.0, upper_limit(an), 41))?;
        min = min.min(checks::strict_convexity(&curve).measured);
    }
    Ok(verdict(min > 1e-8, format!("min Psi'' = {min:.3e} on [-5, alpha0 - 0.05] (limit > 1e-8)")))
}

fn variance(rand: &[Analysis]) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for an in rand {
        worst = worst.max(checks::variance_routes(an)?.measured);
    }
    let f = deviations::variance_report(&full2()?)?.sigma2;
    let g = deviations::variance_report(&golden()?)?.sigma2;
    let ef = (f - 2.0).abs();
    let eg = (g - instances::golden_ratio().powi(3)).abs();
    Ok(verdict(
        worst <= 1e-6 && ef <= 1e-9 && eg <= 1e-9,
        format!("max |Psi''(0) - series| = {worst:.2e} (limit 1e-6); |sigma2 - 2| = {ef:.1e}, |sigma2 - rho^3| = {eg:.1e} (limit 1e-9)"),
    ))
}

fn visit_variance() -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, an) in [("full 2-shift", full2()?), ("golden mean", golden()?)] {
        let pred = deviations::variance_report(&an)?.sigma2_bar;
        let cfg = SimConfig { seed: MC_SEED, n_returns: 1, n_samples: 100_000, horizon: 10_000, workers: 1 };
        let v = montecarlo::visit_counts(&an.chain, an.recoded.target_blocks(), &cfg)?;
        let rel = (v.sigma2_bar - pred).abs() / pred;
        ok &= rel <= 0.05;
        parts.push(format!("{name}: {:.5} vs {pred:.5} ({:.2}%)", v.sigma2_bar, 100.0 * rel));
    }
    Ok(verdict(ok, format!("{} (limit 5%)", parts.join("; "))))
}

fn large_deviations() -> Result<Verdict> {
    let an = full2()?;
    let closed = |u: f64| {
        if u == 1.0 {
            std::f64::consts::LN_2
        } else {
            let a = (2.0 * (u - 1.0) / u).ln();
            u * a - (a - (2.0 - a.exp()).ln())
        }
    };
    let mut legendre: f64 = 0.0;
    for u in [1.0, 1.5, 3.0, 5.0] {
        legendre = legendre.max((deviations::rate_function(&an.operator, u)?.rate - closed(u)).abs());
    }
    let n = 40;
    let cfg = SimConfig { seed: MC_SEED, n_returns: n, n_samples: 1_000_000, horizon: 1, workers: 1 };
    let stats = montecarlo::sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg)?;
    let (rate, count) = montecarlo::empirical_tail_rate(&stats, an.mu_a, 1.0, Side::Upper)?;
    let i3 = closed(3.0);
    let rel = (rate - i3).abs() / i3;
    let law = oracle::first_return_law(&an.chain, an.recoded.target_blocks(), 1e-14)?;
    let exact = oracle::exact_return_distribution(&law, n)?;
    let p: f64 = exact.distribution.iter().skip(3 * n).sum();
    let exact_rate = -p.ln() / n as f64;
    Ok(verdict(
        rel <= 0.15 && legendre <= 1e-8,
        format!(
            "tail rate {rate:.4} from {count} hits vs I(3) = {i3:.4}: {:.1}% (limit 15%); exact n = {n} rate {exact_rate:.4}; Legendre error {legendre:.1e} (limit 1e-8)",
            100.0 * rel
        ),
    ))
}

fn clt() -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, an) in [("full 2-shift", full2()?), ("golden mean", golden()?)] {
        let sigma = an.operator.scgf_derivatives(0.0)?.1.sqrt();
        let cfg = SimConfig { seed: MC_SEED, n_returns: 2000, n_samples: 100_000, horizon: 1, workers: 1 };
        let stats = montecarlo::sample_return_times(&an.chain, an.recoded.target_blocks(), &cfg)?;
        let ks = montecarlo::empirical_clt(&stats, sigma, an.mu_a)?.ks;
        let ks_half = montecarlo::empirical_clt(&stats, 0.5 * sigma, an.mu_a)?.ks;
        ok &= ks <= 0.05 && ks_half >= 0.15;
        parts.push(format!("{name}: KS {ks:.4}, halved sigma {ks_half:.4}"));
    }
    Ok(verdict(ok, format!("{} (limits <= 0.05, >= 0.15)", parts.join("; "))))
}

fn conjugacy(rand: &[Analysis]) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for an in &rand[..N_CONJUGACY] {
        worst = worst.max(checks::conjugacy(an, &checks::fine_law(an)?)?.measured);
    }
    Ok(verdict(worst <= 1e-10, format!("max entry error {worst:.2e} over {N_CONJUGACY} instances (limit 1e-10)")))
}

fn reproducibility() -> Result<Verdict> {
    let tmp = tempfile::tempdir()?;
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/golden.json");
    let run = |dir: &str, workers: &str| -> Result<()> {
        let status = Command::new(env!("CARGO_BIN_EXE_rtstat"))
            .args(["validate", "--config", cfg.to_str().unwrap(), "--samples", "5000", "--seed", "17"])
            .args(["--workers", workers, "--out"])
            .arg(tmp.path().join(dir))
            .output()?
            .status;
        if status.success() {
            Ok(())
        } else {
            Err(Error::Validation(format!("validate exited with {status}")))
        }
    };
    run("a", "1")?;
    run("b", "1")?;
    run("c", "4")?;
    let mut differing = Vec::new();
    for f in ["scgf.csv", "rate.csv", "clt.csv", "tails.csv"] {
        let read = |d: &str| std::fs::read(tmp.path().join(d).join(f));
        let a = read("a")?;
        if a != read("b")? || a != read("c")? {
            differing.push(f);
        }
    }
    Ok(verdict(differing.is_empty(), format!("CSV differences: {differing:?} (1, 1 and 4 workers)")))
}

fn main() {
    let start = Instant::now();
    let mut rand = Vec::new();
    let mut failed = 0;
    let mut report = |i: usize, title: &str, v: Verdict| {
        failed += usize::from(!v.passed);
        println!("{} {i:>2} {title}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    };

    report(1, "lambda_P = 1 on random instances", timed(Some(10.0), || {
        rand = random_analyses()?;
        perron_normalization(&rand)
    }));
    report(2, "Kac identity, spectral and oracle", timed(None, || kac(&rand)));
    report(3, "closed-form CGFs", timed(Some(1.0), closed_forms));
    report(4, "pressure gap and alpha0", timed(None, || pressure_gap(&rand)));
    report(5, "sandwich bound for n = 1..12", timed(Some(30.0), sandwich));
    report(6, "strict convexity", timed(None, || convexity(&rand)));
    report(7, "variance by two routes", timed(None, || variance(&rand)));
    report(8, "visit-count variance", timed(Some(60.0), visit_variance));
    report(9, "large deviations", timed(Some(120.0), large_deviations));
    report(10, "central limit theorem", timed(Some(120.0), clt));
    report(11, "oracle/spectral conjugacy", timed(None, || conjugacy(&rand)));
    report(12, "reproducibility of validate", timed(None, reproducibility));

    println!("acceptance: {} of 12 passed in {:.1} s", 12 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
