use broyden_lab::operator::Role;
use broyden_lab::potentials::{
    augmented_barrier, check_metric_change, check_progress_psi, check_progress_v, logdet_barrier, progress_lb_psi,
    progress_lb_v, scalar_gap,
};
use broyden_lab::sampling::{random_primal, random_spd, random_spd_above, random_spd_bracketed, seeded};
use broyden_lab::{broyd, SpdOperator, TauParam};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

/// Eigenvalues of `G` relative to `A`, from `L^{-1} G L^{-T}` with `A = L L^T`.
fn relative_eigenvalues(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
    let l = a.clone().cholesky().unwrap().l();
    let linv = l.try_inverse().unwrap();
    let m = &linv * g * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn potentials_match_eigenvalue_sums(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = seeded(seed);
        let a = random_spd(n, 100.0, &mut rng).unwrap();
        let g = random_spd_bracketed(&a, 0.1, 10.0, &mut rng).unwrap();
        let lams = relative_eigenvalues(g.matrix(), a.matrix());
        let v: f64 = lams.iter().map(|l| l.ln()).sum();
        let psi: f64 = lams.iter().map(|l| l.ln() - 1.0 + 1.0 / l).sum();
        prop_assert!((logdet_barrier(&a, &g).unwrap() - v).abs() < 1e-9 * (1.0 + v.abs()));
        let got = augmented_barrier(&g, &a).unwrap();
        prop_assert!((got - psi).abs() < 1e-9 * (1.0 + psi));
        prop_assert!(got >= -1e-12);
    }

    #[test]
    fn progress_of_v_above_target(seed in any::<u64>(), n in 1usize..=8, tau in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let a = random_spd(n, 100.0, &mut rng).unwrap();
        let g = random_spd_above(&a, 10.0, &mut rng).unwrap();
        let u = random_primal(n, &mut rng);
        let c = check_progress_v(&a, &g, &u, TauParam::new(tau).unwrap()).unwrap();
        prop_assert!(c.slack() >= -1e-8, "{c:?}");
    }

    #[test]
    fn progress_of_psi(seed in any::<u64>(), n in 1usize..=8, tau in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let a = random_spd(n, 100.0, &mut rng).unwrap();
        let g = random_spd_bracketed(&a, 0.1, 10.0, &mut rng).unwrap();
        let u = random_primal(n, &mut rng);
        let c = check_progress_psi(&a, &g, &u, TauParam::new(tau).unwrap()).unwrap();
        prop_assert!(c.slack() >= -1e-8, "{c:?}");
    }

    #[test]
    fn metric_change(seed in any::<u64>(), n in 1usize..=8, tau in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let a = random_spd(n, 100.0, &mut rng).unwrap();
        let g = random_spd_bracketed(&a, 0.1, 10.0, &mut rng).unwrap();
        let u = random_primal(n, &mut rng);
        let c = check_metric_change(&a, &g, &u, TauParam::new(tau).unwrap()).unwrap();
        prop_assert!(c.slack() >= -1e-8, "{c:?}");
    }

    #[test]
    fn scalar_gap_both_constants(lb in -8.0f64..8.0, la in -10.0f64..5.0) {
        let beta = lb.exp();
        let alpha = beta + la.exp();
        let s = scalar_gap(alpha, beta).unwrap();
        prop_assert!(s.base >= 1.0);
        prop_assert!(s.lhs >= s.rhs_sharp - 1e-12 * s.lhs.abs().max(1.0));
        prop_assert!(s.lhs >= s.rhs - 1e-12 * s.lhs.abs().max(1.0));
    }
}

#[test]
fn v_progress_with_exact_decrease_for_one_dimension() {
    // In one dimension G_+ = A exactly, so V drops to zero.
    let a = SpdOperator::from_diagonal(&[2.0], Role::PrimalToDual).unwrap();
    let g = SpdOperator::from_diagonal(&[8.0], Role::PrimalToDual).unwrap();
    let u = broyden_lab::PrimalVector::new(vec![1.0]).unwrap();
    for tau in [0.0, 0.5, 1.0] {
        let t = TauParam::new(tau).unwrap();
        let g_plus = broyd(&a, &g, &u, t).unwrap().g_plus;
        assert!((g_plus.matrix()[(0, 0)] - 2.0).abs() < 1e-14);
        let c = check_progress_v(&a, &g, &u, t).unwrap();
        assert!((c.lhs - 4f64.ln()).abs() < 1e-14);
        // nu^2 = (8 - 2)^2 / (8 * 2) = 9/4, eta = 4
        let want = ((tau / 4.0 + 1.0 - tau) * 2.25f64).ln_1p();
        assert!((c.rhs - want).abs() < 1e-14);
        assert!(c.holds());
    }
}

#[test]
fn lower_bounds_reject_bad_parameters() {
    let t = TauParam::new(0.5).unwrap();
    assert!(progress_lb_v(0.5, t, 1.0).is_err());
    assert!(progress_lb_psi(0.9, 2.0, t, 1.0).is_err());
    assert!(progress_lb_psi(2.0, 0.9, t, 1.0).is_err());
    assert_eq!(progress_lb_v(3.0, t, 0.0).unwrap(), 0.0);
    assert!(scalar_gap(1.0, 2.0).is_err());
    assert!(scalar_gap(1.0, 0.0).is_err());
}

#[test]
fn scalar_gap_known_values() {
    let s = scalar_gap(1.0, 1.0).unwrap();
    assert_eq!(s.lhs, 0.0);
    assert_eq!(s.rhs, 0.0);
    let s = scalar_gap(3.0, 1.0).unwrap();
    assert!((s.lhs - 2.0).abs() < 1e-15);
    assert!((s.rhs - 6.0 / 13.0 * 3f64.ln()).abs() < 1e-15);
}
