//! The convex Broyden class of quasi-Newton updates.
//!
//! An update replaces the current approximation `G` of a target operator `A`
//! by a rank-two correction that satisfies the secant relation
//! `G_+ u = A u`. The class is parameterized by `tau`, the weight of the DFP
//! component in the update of the *inverse* operator: `tau = 1` is DFP and
//! `tau = 0` is BFGS. The equivalent weight of the DFP component in the
//! primal update is [`phi_tau`].
//!
//! The inverse of the updated operator is always assembled from its own
//! rank-two formula rather than by inverting `G_+`, so that
//! `G_+ * H_+ = I` is a nontrivial consistency check.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{check_dim, norm_dual, norm_primal, PrimalVector, Role, SpdOperator};

/// Directions with Euclidean norm at or below this are treated as zero.
pub const ZERO_DIRECTION: f64 = 1e-300;

/// The parameter of the convex Broyden class, restricted to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TauParam(f64);

impl TauParam {
    pub const DFP: TauParam = TauParam(1.0);
    pub const BFGS: TauParam = TauParam(0.0);

    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidParameter(format!("tau must lie in [0, 1], got {tau}")));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TauParam {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        TauParam::new(v)
    }
}

impl From<TauParam> for f64 {
    fn from(t: TauParam) -> f64 {
        t.0
    }
}

#[derive(Clone, Debug)]
pub struct UpdateResult {
    pub g_plus: SpdOperator,
    pub g_plus_inv: SpdOperator,
    pub phi: f64,
    /// `Det(G_+^{-1}, G)`.
    pub det_ratio: f64,
}

/// Scalars and vectors shared by all the update formulas.
struct Directional {
    u: DVector<f64>,
    au: DVector<f64>,
    gu: DVector<f64>,
    /// `G^{-1} A u`
    hau: DVector<f64>,
    /// `<Au, u>`
    au_u: f64,
    /// `<Gu, u>`
    gu_u: f64,
    /// `<A G^{-1} A u, u>`
    ahau_u: f64,
}

impl Directional {
    /// `None` when `u` is (numerically) zero.
    fn new(a: &SpdOperator, g: &SpdOperator, g_inv: &SpdOperator, u: &PrimalVector) -> Result<Option<Self>> {
        check_operands(a, g, u)?;
        check_dim(g.dim(), g_inv.dim())?;
        if g_inv.role() != Role::DualToPrimal {
            return Err(Error::RoleMismatch {
                expected: Role::DualToPrimal,
                got: g_inv.role(),
            });
        }
        Ok(Self::build(a, g, |v| g_inv.apply_raw(v), u))
    }

    fn from_factor(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector) -> Result<Option<Self>> {
        check_operands(a, g, u)?;
        Ok(Self::build(a, g, |v| g.solve_raw(v), u))
    }

    fn build(
        a: &SpdOperator,
        g: &SpdOperator,
        apply_inverse: impl Fn(&DVector<f64>) -> DVector<f64>,
        u: &PrimalVector,
    ) -> Option<Self> {
        if u.coord_norm() <= ZERO_DIRECTION {
            return None;
        }
        let u = u.as_vector().clone();
        let au = a.apply_raw(&u);
        let gu = g.apply_raw(&u);
        let hau = apply_inverse(&au);
        let au_u = au.dot(&u);
        let gu_u = gu.dot(&u);
        let ahau_u = au.dot(&hau);
        if !(au_u > 0.0 && gu_u > 0.0 && ahau_u > 0.0) {
            // Underflow of the quadratic forms: indistinguishable from u = 0.
            return None;
        }
        Some(Self {
            u,
            au,
            gu,
            hau,
            au_u,
            gu_u,
            ahau_u,
        })
    }

    /// `tau <Au,u>/<AG^{-1}Au,u> + (1 - tau) <Gu,u>/<Au,u>`, the denominator
    /// of `phi_tau` and the determinant ratio.
    fn blend(&self, tau: f64) -> f64 {
        tau * self.au_u / self.ahau_u + (1.0 - tau) * self.gu_u / self.au_u
    }

    fn phi(&self, tau: f64) -> Result<f64> {
        let denom = self.blend(tau);
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!("phi_tau denominator {denom:e} is not positive")));
        }
        Ok((tau * self.au_u / self.ahau_u / denom).clamp(0.0, 1.0))
    }

    fn primal_update(&self, g: &DMatrix<f64>, phi: f64) -> DMatrix<f64> {
        let a = self.au_u;
        let au_aut = &self.au * self.au.transpose();
        let bfgs = g - &self.gu * self.gu.transpose() / self.gu_u + &au_aut / a;
        if phi == 0.0 {
            return bfgs;
        }
        let cross = &self.au * self.gu.transpose();
        let dfp = g - (&cross + cross.transpose()) / a + au_aut * ((self.gu_u / a + 1.0) / a);
        dfp * phi + bfgs * (1.0 - phi)
    }

    fn inverse_update(&self, h: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
        let a = self.au_u;
        let c = self.ahau_u;
        let uut = &self.u * self.u.transpose();
        let cross = &self.hau * self.u.transpose();
        let bfgs = h - (&cross + cross.transpose()) / a + &uut * ((c / a + 1.0) / a);
        if tau == 0.0 {
            return bfgs;
        }
        let dfp = h - &self.hau * self.hau.transpose() / c + uut / a;
        dfp * tau + bfgs * (1.0 - tau)
    }
}

fn check_operands(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector) -> Result<()> {
    for op in [a, g] {
        if op.role() != Role::PrimalToDual {
            return Err(Error::RoleMismatch {
                expected: Role::PrimalToDual,
                got: op.role(),
            });
        }
    }
    check_dim(a.dim(), g.dim())?;
    check_dim(a.dim(), u.dim())
}

/// Weight of the DFP bracket in the primal update.
pub fn phi_tau(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<f64> {
    let dir = Directional::from_factor(a, g, u)?.ok_or(Error::ZeroDirection)?;
    dir.phi(tau.value())
}

/// `Broyd_tau(A, G, u)` together with its inverse.
///
/// A zero direction leaves `G` unchanged (with `phi = tau` and a unit
/// determinant ratio).
pub fn broyd(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<UpdateResult> {
    let g_inv = g.inverse()?;
    broyd_with_inverse(a, g, &g_inv, u, tau)
}

/// Same as [`broyd`], with `G^{-1}` supplied by the caller (as maintained by
/// a quasi-Newton loop) instead of recomputed.
pub fn broyd_with_inverse(
    a: &SpdOperator,
    g: &SpdOperator,
    g_inv: &SpdOperator,
    u: &PrimalVector,
    tau: TauParam,
) -> Result<UpdateResult> {
    let Some(dir) = Directional::new(a, g, g_inv, u)? else {
        return Ok(UpdateResult {
            g_plus: g.clone(),
            g_plus_inv: g_inv.clone(),
            phi: tau.value(),
            det_ratio: 1.0,
        });
    };
    let phi = dir.phi(tau.value())?;
    let g_plus = SpdOperator::symmetrized(dir.primal_update(g.matrix(), phi), Role::PrimalToDual)?;
    let g_plus_inv = SpdOperator::symmetrized(
        dir.inverse_update(g_inv.matrix(), tau.value()),
        Role::DualToPrimal,
    )?;
    Ok(UpdateResult {
        g_plus,
        g_plus_inv,
        phi,
        det_ratio: dir.blend(tau.value()),
    })
}

/// `G_+^{-1}` from the inverse-update formula.
pub fn broyd_inverse(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<SpdOperator> {
    let dir = Directional::from_factor(a, g, u)?.ok_or(Error::ZeroDirection)?;
    let g_inv = g.inverse()?;
    SpdOperator::symmetrized(dir.inverse_update(g_inv.matrix(), tau.value()), Role::DualToPrimal)
}

/// `Det(G_+^{-1}, G)`.
pub fn broyd_det_ratio(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector, tau: TauParam) -> Result<f64> {
    let dir = Directional::from_factor(a, g, u)?.ok_or(Error::ZeroDirection)?;
    Ok(dir.blend(tau.value()))
}

/// Closeness of `G` to `A` along `u`: `||(G - A) u||*_G / ||u||_A`.
pub fn nu(a: &SpdOperator, g: &SpdOperator, u: &PrimalVector) -> Result<f64> {
    check_operands(a, g, u)?;
    let au_norm = norm_primal(a, u)?;
    if u.coord_norm() <= ZERO_DIRECTION || au_norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let diff = &g.apply_primal(u)? - &a.apply_primal(u)?;
    Ok(norm_dual(g, &diff)? / au_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{rel_det, rel_eigen_range};
    use crate::sampling::{random_primal, random_spd, random_spd_bracketed, seeded};
    use nalgebra::dmatrix;

    fn diag(v: &[f64]) -> SpdOperator {
        SpdOperator::from_diagonal(v, Role::PrimalToDual).unwrap()
    }

    fn p(v: &[f64]) -> PrimalVector {
        PrimalVector::new(v.to_vec()).unwrap()
    }

    fn tau(t: f64) -> TauParam {
        TauParam::new(t).unwrap()
    }

    #[test]
    fn tau_outside_unit_interval_is_rejected() {
        assert!(TauParam::new(-0.1).is_err());
        assert!(TauParam::new(1.5).is_err());
        assert!(TauParam::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<TauParam>("2.0").is_err());
        assert_eq!(serde_json::from_str::<TauParam>("0.25").unwrap().value(), 0.25);
    }

    #[test]
    fn phi_examples() {
        let a = diag(&[1.0, 2.0]);
        let g = diag(&[3.0, 3.0]);
        let u = p(&[1.0, 1.0]);
        assert_eq!(phi_tau(&a, &g, &u, TauParam::DFP).unwrap(), 1.0);
        assert_eq!(phi_tau(&a, &g, &u, TauParam::BFGS).unwrap(), 0.0);
        for t in [0.1, 0.5, 0.9] {
            assert!((phi_tau(&a, &a, &u, tau(t)).unwrap() - t).abs() < 1e-15);
        }
        assert!(matches!(phi_tau(&a, &g, &p(&[0.0, 0.0]), tau(0.5)), Err(Error::ZeroDirection)));
    }

    #[test]
    fn exact_approximation_is_a_fixed_point() {
        let a = SpdOperator::new(dmatrix![2.0, 0.5; 0.5, 1.0], Role::PrimalToDual).unwrap();
        let u = p(&[0.3, -1.2]);
        for t in [0.0, 0.4, 1.0] {
            let r = broyd(&a, &a, &u, tau(t)).unwrap();
            assert!((r.g_plus.matrix() - a.matrix()).amax() < 1e-14);
            let a_inv = a.inverse().unwrap();
            let h = broyd_inverse(&a, &a, &u, tau(t)).unwrap();
            assert!((h.matrix() - a_inv.matrix()).amax() < 1e-14);
            assert!((r.det_ratio - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_direction_keeps_g() {
        let a = diag(&[1.0, 2.0]);
        let g = diag(&[3.0, 3.0]);
        let r = broyd(&a, &g, &p(&[0.0, 0.0]), tau(0.3)).unwrap();
        assert_eq!(r.g_plus, g);
        assert_eq!(r.det_ratio, 1.0);
        let r = broyd(&a, &g, &p(&[1e-301, 0.0]), tau(0.3)).unwrap();
        assert_eq!(r.g_plus, g);
    }

    #[test]
    fn bfgs_matches_textbook_two_by_two() {
        // G+ = G - Guu^T G/<Gu,u> + Auu^T A/<Au,u> with A = diag(1,2),
        // G = 3I, u = (1,1): Gu = (3,3), <Gu,u> = 6, Au = (1,2), <Au,u> = 3.
        // G+ = [[3 - 1.5 + 1/3, -1.5 + 2/3], [-1.5 + 2/3, 3 - 1.5 + 4/3]].
        let expected = dmatrix![
            1.5 + 1.0 / 3.0, -1.5 + 2.0 / 3.0;
            -1.5 + 2.0 / 3.0, 1.5 + 4.0 / 3.0
        ];
        let r = broyd(&diag(&[1.0, 2.0]), &diag(&[3.0, 3.0]), &p(&[1.0, 1.0]), TauParam::BFGS).unwrap();
        assert!((r.g_plus.matrix() - expected).amax() < 1e-14);
        assert_eq!(r.phi, 0.0);
    }

    #[test]
    fn dfp_inverse_matches_dense_inverse() {
        let a = diag(&[1.0, 2.0]);
        let g = diag(&[3.0, 3.0]);
        let u = p(&[1.0, 1.0]);
        let r = broyd(&a, &g, &u, TauParam::DFP).unwrap();
        let dense = r.g_plus.matrix().clone().try_inverse().unwrap();
        let h = broyd_inverse(&a, &g, &u, TauParam::DFP).unwrap();
        assert!((h.matrix() - dense).amax() < 1e-13);
    }

    #[test]
    fn det_ratio_examples() {
        let u = p(&[0.7, -0.2, 1.1]);
        let i = diag(&[1.0, 1.0, 1.0]);
        let two = diag(&[2.0, 2.0, 2.0]);
        assert!((broyd_det_ratio(&two, &two, &u, tau(0.6)).unwrap() - 1.0).abs() < 1e-15);
        assert!((broyd_det_ratio(&i, &two, &u, TauParam::BFGS).unwrap() - 2.0).abs() < 1e-15);

        let mut rng = seeded(5);
        let a = random_spd(5, 50.0, &mut rng).unwrap();
        let g = random_spd(5, 50.0, &mut rng).unwrap();
        let u = random_primal(5, &mut rng);
        for t in [0.0, 0.5, 1.0] {
            let r = broyd(&a, &g, &u, tau(t)).unwrap();
            let direct = rel_det(&r.g_plus.inverse().unwrap(), &g).unwrap();
            assert!((r.det_ratio - direct).abs() <= 1e-9 * direct);
        }
    }

    #[test]
    fn nu_examples() {
        let a = SpdOperator::new(dmatrix![2.0, 0.5; 0.5, 1.0], Role::PrimalToDual).unwrap();
        let u = p(&[0.4, 1.0]);
        assert_eq!(nu(&a, &a, &u).unwrap(), 0.0);
        let v = nu(&a, &a.scaled(2.0).unwrap(), &u).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(matches!(nu(&a, &a, &p(&[0.0, 0.0])), Err(Error::ZeroDirection)));
    }

    #[test]
    fn nu_forms_agree() {
        let mut rng = seeded(9);
        let a = random_spd(4, 20.0, &mut rng).unwrap();
        let g = random_spd(4, 20.0, &mut rng).unwrap();
        let u = random_primal(4, &mut rng);
        let diff = g.matrix() - a.matrix();
        let middle = &diff * g.matrix().clone().try_inverse().unwrap() * &diff;
        let uv = u.as_vector();
        let quad = (uv.dot(&(&middle * uv)) / uv.dot(&(a.matrix() * uv))).sqrt();
        let v = nu(&a, &g, &u).unwrap();
        assert!((v - quad).abs() <= 1e-10 * quad);
    }

    #[test]
    fn secant_inverse_property() {
        let mut rng = seeded(21);
        let a = random_spd(6, 100.0, &mut rng).unwrap();
        let g = random_spd(6, 100.0, &mut rng).unwrap();
        let u = random_primal(6, &mut rng);
        let au = a.apply_raw(u.as_vector());
        for t in [0.0, 0.5, 1.0] {
            let h = broyd_inverse(&a, &g, &u, tau(t)).unwrap();
            let back = h.apply_raw(&au);
            assert!((back - u.as_vector()).norm() <= 1e-10 * u.coord_norm());
        }
    }

    #[test]
    fn eigen_bracket_is_preserved() {
        let mut rng = seeded(33);
        let a = random_spd(5, 30.0, &mut rng).unwrap();
        let g = random_spd_bracketed(&a, 0.3, 7.0, &mut rng).unwrap();
        let before = rel_eigen_range(&g, &a).unwrap().including_one();
        for k in 0..=10 {
            let u = random_primal(5, &mut rng);
            let r = broyd(&a, &g, &u, tau(k as f64 / 10.0)).unwrap();
            let after = rel_eigen_range(&r.g_plus, &a).unwrap();
            assert!(before.contains(&after, 1e-9), "{before:?} vs {after:?}");
        }
    }

    #[test]
    fn role_errors() {
        let a = diag(&[1.0, 2.0]);
        let h = SpdOperator::from_diagonal(&[1.0, 2.0], Role::DualToPrimal).unwrap();
        assert!(matches!(broyd(&a, &h, &p(&[1.0, 0.0]), TauParam::BFGS), Err(Error::RoleMismatch { .. })));
        assert!(matches!(broyd(&a, &a, &p(&[1.0]), TauParam::BFGS), Err(Error::DimMismatch { .. })));
    }
}
