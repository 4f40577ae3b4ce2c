// Pressure, the equilibrium chain and the target-avoiding pressure of the
// golden-mean shift.

use return_thermo::prelude::*;

pub fn run() -> Result<()> {
    let sys = instances::golden_mean(&[1])?;
    let recoded = shift::recode_higher_block(&sys);
    let chain = thermo::gibbs_chain(&recoded)?;
    let avoid = thermo::restricted_pressure(&recoded)?;

    println!("P  = {:.12}  (log of the golden ratio: {:.12})", chain.pressure, instances::golden_ratio().ln());
    println!("P' = {:.12}", avoid.value);
    println!("entropy = {:.12}", chain.entropy);
    for i in 0..chain.n_states() {
        println!("  p[{i}] = {:?}   pi[{i}] = {:.12}", chain.transition_probs.row(i), chain.stationary[i]);
    }
    println!("mu(A) = {:.12}", thermo::target_measure(&chain, recoded.target_blocks()));
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
