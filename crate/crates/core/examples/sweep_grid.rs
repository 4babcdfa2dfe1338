//! A small parameter sweep over dimension, condition number and method.
//!
//! Run with `cargo run --release --example sweep_grid`.

use broyden_lab::bounds::Method;
use broyden_lab::runner::sweep::{run_sweep, sweep_csv, SweepGrid};

fn main() -> broyden_lab::Result<()> {
    let grid = SweepGrid {
        n: vec![4, 16],
        l_over_mu: vec![10.0, 100.0, 1000.0],
        methods: vec![Method::Bfgs, Method::Dfp],
        seed: 0,
        max_iter: 5000,
        output_dir: None,
    };
    let rows = run_sweep(&grid, None)?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
