//! Runs an experiment file the way `broyden-lab run` does and prints the
//! summaries instead of writing them.
//!
//! Run with `cargo run --release --example run_config [config.json]`; the
//! default is `examples/configs/suite.json`.

use std::path::PathBuf;

use broyden_lab::runner::{config, run_suite};

fn main() -> broyden_lab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/suite.json"));
    let configs = config::load_configs(&path)?;
    let prepared = config::prepare(&configs, None, config::seed_override()?)?;
    for r in run_suite(&prepared, None)? {
        println!(
            "{:<12} passed = {:<5} iterations = {:>5} lambda_final = {:.3e} min slack = {:.3e}",
            r.name,
            r.passed,
            r.iterations.map_or(0, |k| k),
            r.lambda_final.unwrap_or(f64::NAN),
            r.min_slack
        );
    }
    Ok(())
}
