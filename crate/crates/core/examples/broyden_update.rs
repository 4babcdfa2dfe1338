//! One Broyden-class update across the family, from BFGS (`tau = 0`) to DFP
//! (`tau = 1`).
//!
//! Run with `cargo run --release --example broyden_update`.

use broyden_lab::operator::rel_eigen_range;
use broyden_lab::sampling::{random_primal, random_spd, random_spd_bracketed, seeded};
use broyden_lab::{broyd, nu, TauParam};

fn main() -> broyden_lab::Result<()> {
    let mut rng = seeded(1);
    let a = random_spd(5, 50.0, &mut rng)?;
    let g = random_spd_bracketed(&a, 0.5, 4.0, &mut rng)?;
    let u = random_primal(5, &mut rng);

    let before = rel_eigen_range(&g, &a)?;
    println!("relative spectrum of G: [{:.4}, {:.4}]", before.min_rel, before.max_rel);
    println!("nu(A, G, u) = {:.6}\n", nu(&a, &g, &u)?);
    println!("{:>5} {:>9} {:>12} {:>20} {:>12}", "tau", "phi", "det ratio", "rel spectrum of G+", "secant err");
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let up = broyd(&a, &g, &u, TauParam::new(t)?)?;
        let range = rel_eigen_range(&up.g_plus, &a)?;
        let gu = up.g_plus.matrix() * u.as_vector();
        let au = a.matrix() * u.as_vector();
        println!(
            "{t:>5.2} {:>9.5} {:>12.6} [{:>8.4}, {:>8.4}] {:>12.2e}",
            up.phi,
            up.det_ratio,
            range.min_rel,
            range.max_rel,
            (gu - &au).norm() / au.norm()
        );
    }
    Ok(())
}
