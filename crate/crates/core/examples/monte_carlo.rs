// Seeded simulation of return times: empirical CGF, a tail rate and the CLT.

use return_thermo::prelude::*;

pub fn run() -> Result<()> {
    let an = Analysis::new(&instances::full_shift(2, &[0])?)?;
    let target = an.recoded.target_blocks();
    let cfg = SimConfig { seed: 42, n_returns: 10, n_samples: 20_000, ..SimConfig::default() };
    let stats = montecarlo::sample_return_times(&an.chain, target, &cfg)?;
    println!("{} ({} samples of r^{})", montecarlo::RNG_ALGORITHM, stats.samples.len(), stats.n_returns);
    println!("mean r^n/n = {:.5} (Kac: {})", stats.mean / 10.0, an.mean_return());
    for alpha in [-1.0, -0.2] {
        let (v, ess) = montecarlo::empirical_scgf(&stats, alpha)?;
        println!("alpha {alpha}: empirical {v:.5}, psi {:.5}, ess {ess:.0}", an.operator.scgf(alpha)?);
    }
    let (rate, count) = montecarlo::empirical_tail_rate(&stats, an.mu_a, 1.0, Side::Upper)?;
    println!("upper tail at u = 1: rate {rate:.4} from {count} hits; I(3) = {:.4}", deviations::rate_function(&an.operator, 3.0)?.rate);

    let clt_cfg = SimConfig { n_returns: 500, n_samples: 5_000, ..cfg };
    let clt = montecarlo::sample_return_times(&an.chain, target, &clt_cfg)?;
    let sigma = an.operator.scgf_derivatives(0.0)?.1.sqrt();
    let ks = montecarlo::empirical_clt(&clt, sigma, an.mu_a)?.ks;
    println!("KS distance at n = 500: {ks:.4}");

    let visits = montecarlo::visit_counts(&an.chain, target, &SimConfig { horizon: 2_000, n_samples: 2_000, ..cfg })?;
    println!("Var(N)/h = {:.4} (predicted 0.25)", visits.sigma2_bar);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
