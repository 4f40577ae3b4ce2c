// Runs the `validate` command on a config file, as `rtstat validate` would.
//
// ```text
// cargo run --release --example validate_config -- configs/golden.json /tmp/golden
// ```

use std::path::PathBuf;

use return_thermo::cli::{commands, RunOptions};
use return_thermo::Result;

pub fn run_with(config: PathBuf, out: PathBuf, samples: Option<usize>) -> Result<i32> {
    let opts = RunOptions { out: Some(out), samples, ..RunOptions::default() };
    let outcome = commands::run_named("validate", &config, opts)?;
    for c in &outcome.report.checks {
        println!("{} {:<28} {:.3e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured);
    }
    println!("files: {}", outcome.report.files.join(", "));
    Ok(outcome.exit_code)
}

pub fn run() -> Result<i32> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let config = args.next().map_or_else(|| root.join("configs/full2.json"), PathBuf::from);
    let out = args.next().map_or_else(|| std::env::temp_dir().join("rtstat-validate"), PathBuf::from);
    run_with(config, out, Some(2_000))
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
