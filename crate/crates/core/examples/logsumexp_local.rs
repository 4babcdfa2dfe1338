//! General scheme on a regularized log-sum-exp function started inside the
//! region of local superlinear convergence.
//!
//! Run with `cargo run --release --example logsumexp_local`.

use broyden_lab::bounds::{self, EnvelopeKind};
use broyden_lab::problems::{LogSumExpProblem, ProblemInstance};
use broyden_lab::solver::{run_general, SolverConfig, TauSchedule};
use broyden_lab::PrimalVector;

fn main() -> broyden_lab::Result<()> {
    let p: ProblemInstance = LogSumExpProblem::random(8, 20, 1.0, 0.1, 7)?.into();
    let (n, mu, ell, m) = (p.dim(), p.mu(), p.ell(), p.self_concordance());
    println!("n = {n}, mu = {mu}, L = {ell}, M = {m:.3}");

    for sched in [TauSchedule::ConstantBfgs, TauSchedule::ConstantDfp] {
        let radius = bounds::region_radius(mu, ell, n, sched.sup_tau(), m)?;
        let dir = PrimalVector::new((0..n).map(|i| (i as f64 * 0.7).cos()).collect())?;
        let x0 = p.point_with_lambda(&dir, 0.5 * radius)?;
        let cfg = SolverConfig {
            grad_tol: 1e-11,
            ..SolverConfig::default()
        };
        let trace = run_general(&p, &x0, &sched, &cfg)?;
        println!(
            "\n{}: K0 = {}, radius = {radius:.3e}, lambda0 = {:.3e}, {} iterations",
            sched.label(),
            bounds::k0(n, mu, ell, sched.sup_tau())?,
            trace.lambda0(),
            trace.iterations()
        );
        println!("{:>4} {:>12} {:>12} {:>12}", "k", "lambda", "xi", "eig range");
        for rec in &trace.records {
            let range = rec.eig_range.unwrap();
            println!(
                "{:>4} {:>12.4e} {:>12.9} [{:.3}, {:.3}]",
                rec.k, rec.lambda, rec.xi, range.min_rel, range.max_rel
            );
        }
        for kind in [
            EnvelopeKind::OpHess,
            EnvelopeKind::GeneralLinear,
            EnvelopeKind::GeneralSuperlinear,
            EnvelopeKind::GeneralLinearLemma,
            EnvelopeKind::GeneralSuperlinearLemma,
            EnvelopeKind::OpHessXi,
            EnvelopeKind::OpIntXi,
            EnvelopeKind::StepBound,
        ] {
            let rep = bounds::evaluate(kind, &trace, &p, 1.0)?;
            println!(
                "{:<28} asserted = {:<5} satisfied = {:<5} min slack = {:.3e}",
                rep.name,
                rep.asserted,
                rep.all_satisfied(),
                rep.min_slack()
            );
        }
    }
    Ok(())
}
