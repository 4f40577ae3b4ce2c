// Random systems with depth-3 potentials: pressure gap, Kac and the two
// variance routes.

use return_thermo::checks;
use return_thermo::prelude::*;

pub fn run() -> Result<()> {
    for seed in 0..5 {
        let sys = instances::random_instance(instances::RandomSpec::default(), seed);
        let an = Analysis::new(&sys)?;
        let kac = checks::kac_spectral(&an)?;
        let var = checks::variance_routes(&an)?;
        println!(
            "seed {seed}: {} symbols, depth {}, {} blocks, target {:?}, alpha0 {:.6}, Kac residual {:.1e}, variance gap {:.1e}",
            sys.n_symbols(),
            sys.potential().depth(),
            an.recoded.block_states().len(),
            sys.target().symbols(),
            an.alpha0(),
            kac.measured,
            var.measured
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
