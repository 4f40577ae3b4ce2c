macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(pressure_and_gibbs);
example!(scgf_curve);
example!(rate_function);
example!(exact_return_law);
example!(monte_carlo);
example!(random_instances);
example!(validate_config);

#[test]
fn pressure_and_gibbs_runs() {
    pressure_and_gibbs::run().unwrap();
}

#[test]
fn scgf_curve_runs() {
    scgf_curve::run().unwrap();
}

#[test]
fn rate_function_runs() {
    rate_function::run().unwrap();
}

#[test]
fn exact_return_law_runs() {
    exact_return_law::run().unwrap();
}

#[test]
fn monte_carlo_runs() {
    monte_carlo::run().unwrap();
}

#[test]
fn random_instances_runs() {
    random_instances::run().unwrap();
}

#[test]
fn validate_config_runs() {
    let out = tempfile::tempdir().unwrap();
    let config = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/golden.json");
    let code = validate_config::run_with(config, out.path().to_path_buf(), Some(2_000)).unwrap();
    assert_eq!(code, 0);
    assert!(out.path().join("report.json").exists());
}
