// The scaled CGF of the return time to one symbol of the full 2-shift, against
// its closed form `α − log(2 − e^α)`.

use return_thermo::prelude::*;

pub fn run() -> Result<()> {
    let an = Analysis::new(&instances::full_shift(2, &[0])?)?;
    println!("alpha0 = {:.12}", an.alpha0());
    let grid: Vec<f64> = (0..9).map(|i| -2.0 + 0.3 * i as f64).collect();
    let curve = an.operator.cgf_curve(&grid)?;
    println!("{:>8} {:>18} {:>18} {:>14} {:>14}", "alpha", "psi", "closed form", "psi'", "psi''");
    for p in curve.points() {
        let exact = p.alpha - (2.0 - p.alpha.exp()).ln();
        println!("{:>8.3} {:>18.14} {:>18.14} {:>14.8} {:>14.8}", p.alpha, p.psi, exact, p.psi1, p.psi2);
    }
    let ev = an.operator.eval(an.pressure())?;
    println!("lambda at S = P: {:.15}", ev.lambda);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
