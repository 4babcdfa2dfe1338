//! Randomized check of the single-update inequalities, the library side of
//! `broyden-lab verify`.
//!
//! Run with `cargo run --release --example verify_inequalities`.

use broyden_lab::runner::verify::run_verify;

fn main() -> broyden_lab::Result<()> {
    let report = run_verify(8, 2000, 42)?;
    for s in &report.stats {
        println!(
            "{:<18} trials {:>6}  violations {:>3}  worst margin {:>10.3e}  (tol {:.0e})",
            s.name, s.trials, s.violations, s.worst_margin, s.tol
        );
    }
    println!("passed: {}", report.passed());
    Ok(())
}
