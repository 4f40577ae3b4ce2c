// Rate function of `r^n/n` and the two-sided deviation limits.

use return_thermo::prelude::*;

pub fn run() -> Result<()> {
    let an = Analysis::new(&instances::golden_mean(&[1])?)?;
    let gamma = an.operator.min_mean_return();
    println!("mean return time {:.10}, smallest cycle mean {gamma}", an.mean_return());
    let u: Vec<f64> = (0..13).map(|i| gamma + 0.5 * i as f64).collect();
    let rate = deviations::rate_function_curve(&an.operator, &u)?;
    for i in 0..u.len() {
        println!("I({:.2}) = {:.12}   alpha* = {:.6}", u[i], rate.rate[i], rate.alpha_star[i]);
    }
    for side in [Side::Upper, Side::Lower] {
        let lim = deviations::deviation_limit(&an.operator, an.mu_a, 1.0, side)?;
        println!("(1/n) log P(r^n/n {} 1/mu(A) by 1) -> {lim:.10}", side.as_str());
    }
    let v = deviations::variance_report(&an)?;
    println!("sigma^2 = {:.12} (series {:.12}), sigma_bar^2 = {:.12}", v.sigma2, v.series_sigma2, v.sigma2_bar);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
