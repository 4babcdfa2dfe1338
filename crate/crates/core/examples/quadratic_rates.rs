//! BFGS, DFP and a convex mixture on an ill-conditioned quadratic, measured
//! against the linear and superlinear envelopes.
//!
//! Run with `cargo run --release --example quadratic_rates`.

use broyden_lab::bounds::{self, EnvelopeKind};
use broyden_lab::problems::quad_make;
use broyden_lab::sampling::{gaussian_vector, log_spaced, seeded};
use broyden_lab::solver::{run_quadratic, SolverConfig, TauSchedule};
use broyden_lab::{DualVector, PrimalVector, ProblemInstance, TauParam};

fn main() -> broyden_lab::Result<()> {
    let n = 10;
    let b = DualVector::from_vector(gaussian_vector(n, &mut seeded(105)))?;
    let q = quad_make(&log_spaced(1.0, 100.0, n), b, 5)?;
    let p = ProblemInstance::Quadratic(q.clone());
    let cfg = SolverConfig {
        record_operators: true,
        ..SolverConfig::default()
    };

    for sched in [
        TauSchedule::ConstantBfgs,
        TauSchedule::Constant(TauParam::new(0.5)?),
        TauSchedule::ConstantDfp,
    ] {
        let trace = run_quadratic(&q, &PrimalVector::zeros(n), &sched, &cfg)?;
        let lin = bounds::evaluate(EnvelopeKind::QuadLinear, &trace, &p, 1.0)?;
        let sup = bounds::evaluate(EnvelopeKind::QuadSuperlinear, &trace, &p, 1.0)?;
        println!("{}: {} iterations, stop = {:?}", sched.label(), trace.iterations(), trace.stop);
        println!("{:>4} {:>12} {:>12} {:>12}", "k", "lambda", "linear", "superlinear");
        for (i, rec) in trace.records.iter().enumerate().step_by(4) {
            let sup_bound = sup.rows.iter().find(|r| r.k == rec.k).map_or(f64::NAN, |r| r.bound);
            println!("{:>4} {:>12.4e} {:>12.4e} {:>12.4e}", rec.k, rec.lambda, lin.rows[i].bound, sup_bound);
        }
        println!("envelopes hold: {}\n", lin.passed() && sup.passed());
    }
    Ok(())
}
