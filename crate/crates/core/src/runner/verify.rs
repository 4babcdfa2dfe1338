//! Randomized suites for the update identities and the one-step
//! inequalities.

use rand::Rng;
use serde::Serialize;

use crate::broyden::{broyd, TauParam};
use crate::error::{Error, Result};
use crate::operator::{rel_eigen_range, PrimalVector, SpdOperator};
use crate::potentials::{check_metric_change, check_progress_psi, check_progress_v, scalar_gap};
use crate::sampling::{random_primal, random_spd, random_spd_above, random_spd_bracketed, seeded, SeededRng};

use super::{EXIT_MALFORMED, EXIT_PASS, EXIT_VIOLATION};

/// `tau` values cycled through the trials.
pub const TAU_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Worst margin of one property over all trials. A margin is positive when
/// the property holds; a trial counts as a violation when its margin is
/// below `-tol`.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyStat {
    pub name: &'static str,
    pub tol: f64,
    pub trials: usize,
    pub violations: usize,
    pub worst_margin: f64,
}

impl PropertyStat {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            tol,
            trials: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, margin: f64) {
        self.trials += 1;
        if !(margin >= -self.tol) {
            self.violations += 1;
        }
        if !(margin >= self.worst_margin) {
            self.worst_margin = margin;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub stats: Vec<PropertyStat>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.stats.iter().all(|s| s.violations == 0)
    }
}

/// One random triple: `A` with condition number up to 100, `G` with spectrum
/// relative to `A` in `[0.1, 10]`, `G_above` with spectrum in `[1, 10]`, and
/// a Gaussian direction.
struct Triple {
    a: SpdOperator,
    g: SpdOperator,
    g_above: SpdOperator,
    u: PrimalVector,
}

fn draw(n_max: usize, rng: &mut SeededRng) -> Result<Triple> {
    let n = rng.random_range(1..=n_max);
    let a = random_spd(n, 100.0, rng)?;
    let g = random_spd_bracketed(&a, 0.1, 10.0, rng)?;
    let g_above = random_spd_above(&a, 10.0, rng)?;
    let u = random_primal(n, rng);
    Ok(Triple { a, g, g_above, u })
}

pub fn run_verify(n_max: usize, trials: usize, seed: u64) -> Result<VerifyReport> {
    if n_max == 0 {
        return Err(Error::Config("--n-max must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    let mut inverse = PropertyStat::new("inverse_identity", 1e-10);
    let mut det = PropertyStat::new("det_ratio", 1e-9);
    let mut secant = PropertyStat::new("secant", 1e-10);
    let mut bracket = PropertyStat::new("eigen_bracket", 1e-9);
    let mut prog_v = PropertyStat::new("progress_v", 1e-8);
    let mut prog_psi = PropertyStat::new("progress_psi", 1e-8);
    let mut metric = PropertyStat::new("metric_change", 1e-8);
    let mut gap = PropertyStat::new("scalar_gap", 1e-12);

    let mut rng = seeded(seed);
    for i in 0..trials {
        let tau = TauParam::new(TAU_GRID[i % TAU_GRID.len()])?;
        let t = draw(n_max, &mut rng)?;
        let n = t.a.dim();

        let up = broyd(&t.a, &t.g, &t.u, tau)?;
        let prod = up.g_plus.matrix() * up.g_plus_inv.matrix() - nalgebra::DMatrix::identity(n, n);
        let residual = prod.singular_values().max();
        inverse.record(-residual);

        let exact = (t.g.logdet() - up.g_plus.logdet()).exp();
        det.record(-(up.det_ratio - exact).abs() / exact);

        let uv = t.u.as_vector();
        let au = t.a.apply_raw(uv);
        secant.record(-(up.g_plus.apply_raw(uv) - &au).norm() / au.norm());

        let before = rel_eigen_range(&t.g, &t.a)?.including_one();
        let after = rel_eigen_range(&up.g_plus, &t.a)?;
        bracket.record((after.min_rel - before.min_rel).min(before.max_rel - after.max_rel));

        prog_v.record(check_progress_v(&t.a, &t.g_above, &t.u, tau)?.slack());
        prog_psi.record(check_progress_psi(&t.a, &t.g, &t.u, tau)?.slack());
        metric.record(check_metric_change(&t.a, &t.g, &t.u, tau)?.slack());

        let beta = (rng.random_range(-6.0..6.0f64)).exp();
        let alpha = beta + (rng.random_range(-8.0..4.0f64)).exp();
        let s = scalar_gap(alpha, beta)?;
        gap.record((s.lhs - s.rhs_sharp).min(s.lhs - s.rhs));
    }
    Ok(VerifyReport {
        stats: vec![inverse, det, secant, bracket, prog_v, prog_psi, metric, gap],
    })
}

/// `verify [--n-max K] [--trials T] [--seed S]`.
pub fn cmd_verify(n_max: usize, trials: usize, seed: u64) -> u8 {
    let report = match run_verify(n_max, trials, seed) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VIOLATION;
        }
    };
    println!("{:<18} {:>7} {:>10} {:>14} {:>8}", "property", "trials", "violations", "worst margin", "tol");
    for s in &report.stats {
        println!(
            "{:<18} {:>7} {:>10} {:>14.3e} {:>8.0e}",
            s.name, s.trials, s.violations, s.worst_margin, s.tol
        );
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_reproducible() {
        let a = run_verify(4, 50, 3).unwrap();
        assert!(a.passed(), "{:?}", a.stats);
        let b = run_verify(4, 50, 3).unwrap();
        for (x, y) in a.stats.iter().zip(&b.stats) {
            assert_eq!(x.worst_margin.to_bits(), y.worst_margin.to_bits());
        }
        assert!(run_verify(4, 0, 3).is_err());
        assert!(run_verify(0, 5, 3).is_err());
    }
}
