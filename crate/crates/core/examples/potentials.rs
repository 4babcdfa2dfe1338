//! Potential functions before and after an update, next to the lower bounds
//! on their decrease.
//!
//! Run with `cargo run --release --example potentials`.

use broyden_lab::potentials::{
    augmented_barrier, check_metric_change, check_progress_psi, check_progress_v, logdet_barrier, scalar_gap,
};
use broyden_lab::sampling::{random_primal, random_spd, random_spd_above, random_spd_bracketed, seeded};
use broyden_lab::{broyd, TauParam};

fn main() -> broyden_lab::Result<()> {
    let mut rng = seeded(3);
    let a = random_spd(6, 100.0, &mut rng)?;
    let g = random_spd_bracketed(&a, 0.2, 8.0, &mut rng)?;
    let g_above = random_spd_above(&a, 8.0, &mut rng)?;
    let u = random_primal(6, &mut rng);

    for t in [0.0, 0.5, 1.0] {
        let tau = TauParam::new(t)?;
        let g_plus = broyd(&a, &g_above, &u, tau)?.g_plus;
        let g_psi = broyd(&a, &g, &u, tau)?.g_plus;
        println!("tau = {t}");
        println!(
            "  V:   {:.5} -> {:.5}",
            logdet_barrier(&a, &g_above)?,
            logdet_barrier(&a, &g_plus)?
        );
        println!("  psi: {:.5} -> {:.5}", augmented_barrier(&g, &a)?, augmented_barrier(&g_psi, &a)?);
        for (name, c) in [
            ("V decrease", check_progress_v(&a, &g_above, &u, tau)?),
            ("psi decrease", check_progress_psi(&a, &g, &u, tau)?),
            ("metric change", check_metric_change(&a, &g, &u, tau)?),
        ] {
            println!("  {name:<14} {:.5} >= {:.5}  {}", c.lhs, c.rhs, c.holds());
        }
    }

    println!("\nalpha - ln beta - 1 against both constants:");
    for (alpha, beta) in [(1.0, 0.5), (2.0, 1.0), (5.0, 0.1), (10.0, 8.0)] {
        let s = scalar_gap(alpha, beta)?;
        println!(
            "  alpha = {alpha:<4} beta = {beta:<4} lhs = {:.5}  sharp = {:.5}  6/13 = {:.5}",
            s.lhs, s.rhs_sharp, s.rhs
        );
    }
    Ok(())
}
