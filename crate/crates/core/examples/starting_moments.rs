//! When does superlinear convergence start? The new and previous starting
//! moments for BFGS and DFP, and the first iteration where the superlinear
//! envelope drops below the linear one.
//!
//! Run with `cargo run --release --example starting_moments`.

use broyden_lab::bounds::{env_start_comparison, Method};
use broyden_lab::runner::sweep::first_crossing;

fn main() -> broyden_lab::Result<()> {
    println!(
        "{:>4} {:>8} {:>6} {:>14} {:>14} {:>10}",
        "n", "L/mu", "method", "new start", "previous", "crossing"
    );
    for n in [5, 20, 100] {
        for ratio in [10.0, 1e3, 1e5] {
            for (method, tau) in [(Method::Bfgs, 0.0), (Method::Dfp, 1.0)] {
                let s = env_start_comparison(n, 1.0, ratio, 1, 1.0, method)?;
                let cross = first_crossing(n, 1.0, ratio, tau, 10_000_000)?
                    .map_or_else(|| "-".to_string(), |k| k.to_string());
                println!(
                    "{n:>4} {ratio:>8.0e} {:>6} {:>14.1} {:>14.1} {cross:>10}",
                    format!("{method:?}"),
                    s.start_new,
                    s.start_prev
                );
            }
        }
    }
    Ok(())
}
