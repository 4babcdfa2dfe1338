//! Log-det potentials and the one-step progress inequalities for the convex
//! Broyden class, as predicates with explicit slack.

use serde::{Deserialize, Serialize};

use crate::broyden::{broyd, nu, TauParam};
use crate::error::{Error, Result};
use crate::operator::{check_dim, rel_eigen_range, PrimalVector, Role, SpdOperator};

/// Absolute slack allowed in every inequality check.
pub const ABS_SLACK: f64 = 1e-9;
/// Relative slack (times `|lhs|`) allowed in every inequality check.
pub const REL_SLACK: f64 = 1e-9;

const SIX_THIRTEENTHS: f64 = 6.0 / 13.0;

/// `lhs >= rhs`, measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs }
    }

    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn holds(&self) -> bool {
        self.holds_within(ABS_SLACK, REL_SLACK)
    }

    pub fn holds_within(&self, abs: f64, rel: f64) -> bool {
        self.lhs >= self.rhs - (abs + rel * self.lhs.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSnapshot {
    pub v: f64,
    pub psi: f64,
    pub nu: f64,
}

impl PotentialSnapshot {
    pub fn measure(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector) -> Result<Self> {
        Ok(Self {
            v: logdet_barrier(a, g)?,
            psi: augmented_barrier(g, a)?,
            nu: nu(a, g, u)?,
        })
    }
}

fn check_pair(a: &SpdOperator, g: &SpdOperator) -> Result<()> {
    for op in [a, g] {
        if op.role() != Role::PrimalToDual {
            return Err(Error::RoleMismatch {
                expected: Role::PrimalToDual,
                got: op.role(),
            });
        }
    }
    check_dim(a.dim(), g.dim())
}

/// `V(A, G) = ln Det(A^{-1}, G)`. Nonnegative when `A <= G`.
pub fn logdet_barrier(a: &SpdOperator, g: &SpdOperator) -> Result<f64> {
    check_pair(a, g)?;
    Ok(g.logdet() - a.logdet())
}

/// `psi(G, A) = ln Det(A^{-1}, G) - <G^{-1}, G - A>`, the Bregman divergence
/// of `-ln Det` centered at `G`. Always nonnegative.
pub fn augmented_barrier(g: &SpdOperator, a: &SpdOperator) -> Result<f64> {
    let v = logdet_barrier(a, g)?;
    let tr_ginv_a = g.solve_matrix(a.matrix()).trace();
    Ok(v - (g.dim() as f64 - tr_ginv_a))
}

/// Lower bound on `V(A, G) - V(A, G_+)` when `A <= G <= eta A`.
pub fn progress_lb_v(eta: f64, tau: TauParam, nu: f64) -> Result<f64> {
    if !(eta >= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must be >= 1, got {eta}")));
    }
    let t = tau.value();
    Ok(((t / eta + 1.0 - t) * nu * nu).ln_1p())
}

/// Lower bound on `psi(G, A) - psi(G_+, A)` when `A/xi <= G <= eta A`.
pub fn progress_lb_psi(xi: f64, eta: f64, tau: TauParam, nu: f64) -> Result<f64> {
    if !(xi >= 1.0 && eta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "xi and eta must be >= 1, got xi = {xi}, eta = {eta}"
        )));
    }
    let t = tau.value();
    Ok(SIX_THIRTEENTHS * ((t / (xi * eta) + 1.0 - t) * nu * nu).ln_1p())
}

/// Both sides of `alpha - ln beta - 1 >= c ln(alpha + 1/beta - 1)` for the
/// two constants `c = sqrt(3)/(2 + sqrt(3))` and `c = 6/13`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarGap {
    pub lhs: f64,
    /// With the constant `6/13`.
    pub rhs: f64,
    /// With the constant `sqrt(3)/(2 + sqrt(3))`.
    pub rhs_sharp: f64,
    /// `alpha + 1/beta - 1`, which is at least one.
    pub base: f64,
}

pub fn scalar_gap(alpha: f64, beta: f64) -> Result<ScalarGap> {
    if !(beta > 0.0 && alpha >= beta && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scalar gap needs alpha >= beta > 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let base = alpha + 1.0 / beta - 1.0;
    let log_base = base.ln();
    let sqrt3 = 3f64.sqrt();
    Ok(ScalarGap {
        lhs: alpha - beta.ln() - 1.0,
        rhs: SIX_THIRTEENTHS * log_base,
        rhs_sharp: sqrt3 / (2.0 + sqrt3) * log_base,
        base,
    })
}

/// Both sides of the change-of-metric inequality
/// `nu^2(A, G, u) >= <(G - A) G_+^{-1} (G - A) u, u> / ((1 + xi) <Gu, u>)`
/// with `1/xi` the smallest eigenvalue of `G` relative to `A`.
pub fn metric_change_lb(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<(f64, f64)> {
    let nu_val = nu(a, g, u)?;
    let xi = 1.0 / rel_eigen_range(g, a)?.min_rel;
    let update = broyd(a, g, u, tau)?;
    let uv = u.as_vector();
    let diff = g.apply_raw(uv) - a.apply_raw(uv);
    let num = diff.dot(&update.g_plus_inv.apply_raw(&diff));
    let rhs = num / ((1.0 + xi) * g.quad_form(uv));
    Ok((nu_val * nu_val, rhs))
}

/// Measured decrease of `V(A, .)` over one update against its lower bound,
/// with the tight `eta`. Requires `A <= G`.
pub fn check_progress_v(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<InequalityCheck> {
    let range = rel_eigen_range(g, a)?;
    let eta = range.max_rel.max(1.0);
    let g_plus = broyd(a, g, u, tau)?.g_plus;
    let drop = logdet_barrier(a, g)? - logdet_barrier(a, &g_plus)?;
    Ok(InequalityCheck::new(drop, progress_lb_v(eta, tau, nu(a, g, u)?)?))
}

/// Measured decrease of `psi(., A)` over one update against its lower bound,
/// with the tight `(xi, eta)`.
pub fn check_progress_psi(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<InequalityCheck> {
    let range = rel_eigen_range(g, a)?;
    let xi = (1.0 / range.min_rel).max(1.0);
    let eta = range.max_rel.max(1.0);
    let g_plus = broyd(a, g, u, tau)?.g_plus;
    let drop = augmented_barrier(g, a)? - augmented_barrier(&g_plus, a)?;
    Ok(InequalityCheck::new(drop, progress_lb_psi(xi, eta, tau, nu(a, g, u)?)?))
}

pub fn check_metric_change(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<InequalityCheck> {
    let (nu_sq, rhs) = metric_change_lb(a, g, u, tau)?;
    Ok(InequalityCheck::new(nu_sq, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_primal, random_spd, random_spd_bracketed, seeded};
    use nalgebra::dmatrix;

    fn spd(m: nalgebra::DMatrix<f64>) -> SpdOperator {
        SpdOperator::new(m, Role::PrimalToDual).unwrap()
    }

    fn tau(t: f64) -> TauParam {
        TauParam::new(t).unwrap()
    }

    #[test]
    fn barrier_examples() {
        let a = spd(dmatrix![2.0, 0.4, 0.0; 0.4, 1.0, 0.1; 0.0, 0.1, 3.0]);
        assert!(logdet_barrier(&a, &a).unwrap().abs() < 1e-14);
        let v = logdet_barrier(&a, &a.scaled(2.0).unwrap()).unwrap();
        assert!((v - 3.0 * 2f64.ln()).abs() < 1e-13);

        // A = mu B, G = L B.
        let b = spd(dmatrix![1.5, 0.2; 0.2, 0.7]);
        let (mu, l) = (0.5, 40.0);
        let v = logdet_barrier(&b.scaled(mu).unwrap(), &b.scaled(l).unwrap()).unwrap();
        assert!((v - 2.0 * (l / mu).ln()).abs() < 1e-12);
    }

    #[test]
    fn augmented_barrier_examples() {
        let a = spd(dmatrix![2.0, 0.4; 0.4, 1.0]);
        assert!(augmented_barrier(&a, &a).unwrap().abs() < 1e-14);
        let psi = augmented_barrier(&a.scaled(2.0).unwrap(), &a).unwrap();
        assert!((psi - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!((psi - 0.38629).abs() < 1e-5);
    }

    #[test]
    fn augmented_barrier_at_start_is_bounded() {
        let mut rng = seeded(2);
        let b = random_spd(4, 5.0, &mut rng).unwrap();
        let (mu, l) = (0.2, 30.0);
        let a = random_spd_bracketed(&b, mu, l, &mut rng).unwrap();
        let psi = augmented_barrier(&b.scaled(l).unwrap(), &a).unwrap();
        assert!(psi >= 0.0 && psi <= 4.0 * (l / mu).ln());
    }

    #[test]
    fn progress_bound_examples() {
        assert_eq!(progress_lb_v(3.0, tau(0.4), 0.0).unwrap(), 0.0);
        assert!((progress_lb_v(17.0, TauParam::BFGS, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((progress_lb_v(4.0, TauParam::DFP, 2.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(progress_lb_v(0.5, TauParam::DFP, 2.0).is_err());

        assert_eq!(progress_lb_psi(2.0, 3.0, tau(0.4), 0.0).unwrap(), 0.0);
        let c = 6.0 / 13.0 * 2f64.ln();
        assert!((progress_lb_psi(5.0, 7.0, TauParam::BFGS, 1.0).unwrap() - c).abs() < 1e-15);
        assert!((progress_lb_psi(2.0, 2.0, TauParam::DFP, 2.0).unwrap() - c).abs() < 1e-15);
        assert!(progress_lb_psi(0.9, 2.0, TauParam::DFP, 2.0).is_err());
    }

    #[test]
    fn scalar_gap_examples() {
        let g = scalar_gap(1.0, 1.0).unwrap();
        assert_eq!((g.lhs, g.rhs), (0.0, 0.0));
        let g = scalar_gap(2.0, 1.0).unwrap();
        assert!((g.lhs - 1.0).abs() < 1e-15);
        assert!((g.rhs - 0.319_914_2).abs() < 1e-6);
        let g = scalar_gap(4.0, 4.0).unwrap();
        assert!((g.lhs - (3.0 - 4f64.ln())).abs() < 1e-15);
        assert!((g.lhs - 1.613_706).abs() < 1e-6);
        assert!((g.rhs - 0.544_0).abs() < 1e-4);
        assert!(g.lhs >= g.rhs_sharp && g.rhs_sharp >= g.rhs);
        assert!(scalar_gap(1.0, 2.0).is_err());
        assert!(scalar_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn metric_change_examples() {
        let a = spd(dmatrix![2.0, 0.4; 0.4, 1.0]);
        let u = PrimalVector::new(vec![0.3, -0.8]).unwrap();
        let (lhs, rhs) = metric_change_lb(&a, &a, &u, tau(0.5)).unwrap();
        assert!(lhs.abs() < 1e-28 && rhs.abs() < 1e-28);
        let (lhs, rhs) = metric_change_lb(&a, &a.scaled(2.0).unwrap(), &u, TauParam::BFGS).unwrap();
        assert!((lhs - 0.5).abs() < 1e-14);
        assert!(lhs >= rhs);
    }

    #[test]
    fn lemma_checks_on_random_instances() {
        let mut rng = seeded(77);
        for n in 1..=6 {
            let a = random_spd(n, 100.0, &mut rng).unwrap();
            let above = random_spd_bracketed(&a, 1.0, 50.0, &mut rng).unwrap();
            let around = random_spd_bracketed(&a, 0.05, 20.0, &mut rng).unwrap();
            let u = random_primal(n, &mut rng);
            for t in [0.0, 0.5, 1.0] {
                assert!(check_progress_v(&a, &above, &u, tau(t)).unwrap().holds());
                assert!(check_progress_psi(&a, &around, &u, tau(t)).unwrap().holds());
                assert!(check_metric_change(&a, &around, &u, tau(t)).unwrap().holds());
            }
        }
    }

    #[test]
    fn snapshot_fields() {
        let a = spd(dmatrix![2.0, 0.4; 0.4, 1.0]);
        let g = a.scaled(2.0).unwrap();
        let u = PrimalVector::new(vec![1.0, 1.0]).unwrap();
        let s = PotentialSnapshot::measure(&a, &g, &u).unwrap();
        assert!((s.v - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!((s.nu - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(s.psi > 0.0);
    }
}
