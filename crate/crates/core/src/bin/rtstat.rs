use clap::Parser;
use return_thermo::cli::{self, Cli};

fn main() {
    std::process::exit(cli::run(&Cli::parse()));
}
