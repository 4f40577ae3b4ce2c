// The first-return law of a depth-2 system, the exact law of the 5th return
// time and its exponential moments next to `e^{nΨ(α)}`.

use return_thermo::prelude::*;

pub fn run() -> Result<()> {
    let t = vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]];
    let sys = SymbolicSystem::with_potential_fn(t, 2, |w| 0.3 * w[0] as f64 - 0.2 * w[1] as f64, TargetSet::single(2))?;
    let an = Analysis::new(&sys)?;
    let law = oracle::first_return_law(&an.chain, an.recoded.target_blocks(), 1e-14)?;
    let mean = law.mean();
    println!("horizon {}, omitted mass {:.2e}", law.t_max, law.tail_bound);
    println!("E tau = {:.14} +- {:.1e}, 1/mu(A) = {:.14}", mean.value, mean.error_bound, an.mean_return());

    let series = oracle::covariance_series(&law, 1e-10)?;
    println!("covariance series: sigma^2 = {:.12} after {} terms", series.sigma2, series.terms);

    let stats = oracle::exact_return_distribution(&law, 5)?;
    println!("r^5: mean {:.10}, variance {:.10}, min {}", stats.mean, stats.variance, stats.support_min());
    for alpha in [-1.0, -0.2, 0.2] {
        let m = stats.mgf(&law, alpha)?;
        let psi = an.operator.scgf(alpha)?;
        println!("alpha {alpha:>5}: log E e^(alpha r^5) = {:.10}, 5 psi = {:.10}", m.value.ln(), 5.0 * psi);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
