use std::f64::consts::PI;

use dpsense::analytic::{covariance_single, decompose_single, mean_single, two_site_state};
use dpsense::dynamics::{hurwitz_critical_coupling, moment_flow, steady_moments};
use dpsense::metrology::{
    qfim_gaussian_numeric, qfim_qp_basis, qfim_single_closed, qfim_two_site_closed, FiniteDifference,
};
use dpsense::params::{critical_structure, lambda_plus, DimensionlessParams};
use dpsense::validation::{fig2_params, oracle_triangle};
use dpsense::exec::Execution;
use proptest::prelude::*;

#[test]
fn triangle_full_grid() {
    let o = oracle_triangle(Execution::Parallel, 100);
    assert!(o.passed, "{o}");
}

#[test]
fn fig1_mean_matches_drift_solve() {
    let d = fig2_params().with_lambda(0.9);
    let s = decompose_single(&d, PI / 4.0).unwrap();
    let (x, p) = mean_single(&s);
    let ly = steady_moments(&moment_flow(&d, PI / 4.0, 1)).unwrap();
    assert!((x - ly.mean[0]).abs() < 1e-10 && (p - ly.mean[1]).abs() < 1e-10);
}

#[test]
fn gaussian_fd_matches_closed_two_site() {
    let d = DimensionlessParams::new(0.5, 0.16, 0.13).with_kappa(-0.3);
    let closed = qfim_two_site_closed(&d, 0.7).unwrap();
    let fd = qfim_gaussian_numeric(
        |f, chi| two_site_state(&d.with_force(f), chi),
        (d.force_t, 0.7),
        &FiniteDifference::default(),
    )
    .unwrap();
    assert!((fd.fim - closed.fim).amax() / closed.fim.amax() < 1e-6);
    assert!((fd.commutator_coeff - closed.commutator_coeff).abs() / closed.commutator_coeff.abs() < 1e-6);
}

#[test]
fn bisection_recovers_lambda_plus() {
    for kappa in [0.0, -0.2, -0.4, -0.47] {
        let d = DimensionlessParams::new(0.0, 0.16, 0.13).with_kappa(kappa);
        let got = hurwitz_critical_coupling(&d, 2, 1e-13).unwrap();
        assert!((got - lambda_plus(0.16, kappa).unwrap()).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_site_state_is_physical(frac in 0.0..0.99f64, g in 0.02..2.0f64, f in 0.0..3.0f64, chi in -PI..PI) {
        let d = DimensionlessParams::new(0.0, g, f);
        let d = d.with_lambda(frac * d.lambda_c_sq().sqrt());
        let st = covariance_single(&decompose_single(&d, chi).unwrap());
        prop_assert!(st.asymmetry() < 1e-12);
        prop_assert!(st.uncertainty_margin() > -1e-10);
        let ly = steady_moments(&moment_flow(&d, chi, 1)).unwrap();
        prop_assert!((&st.cov - &ly.cov).amax() < 1e-9);
    }

    #[test]
    fn two_site_state_matches_lyapunov(frac in 0.0..0.98f64, g in 0.05..1.5f64, k in -0.9..0.9f64,
                                       f in 0.0..2.0f64, chi in -PI..PI) {
        let d = DimensionlessParams::new(0.0, g, f).with_kappa(k);
        let star = critical_structure(&d).critical_coupling(true).unwrap();
        let d = d.with_lambda(frac * star);
        let cl = two_site_state(&d, chi).unwrap();
        let ly = steady_moments(&moment_flow(&d, chi, 2)).unwrap();
        prop_assert!((&cl.cov - &ly.cov).amax() < 1e-9 * (1.0 + ly.cov.amax()));
        prop_assert!((&cl.mean - &ly.mean).amax() < 1e-9 * (1.0 + ly.mean.amax()));
        prop_assert!(cl.uncertainty_margin() > -1e-9);
    }

    #[test]
    fn hopping_off_reduces_to_two_copies(frac in 0.0..0.98f64, g in 0.05..1.5f64, chi in -PI..PI) {
        let d = DimensionlessParams::new(0.0, g, 0.4);
        let d = d.with_lambda(frac * d.lambda_c_sq().sqrt());
        let one = qfim_single_closed(&d, chi).unwrap();
        let two = qfim_two_site_closed(&d, chi).unwrap();
        prop_assert!((two.fim - one.fim * 2.0).amax() < 1e-9 * one.fim.amax());
    }

    #[test]
    fn sum_bound_is_phase_free(frac in 0.0..0.98f64, g in 0.05..1.5f64, chi in -PI..PI) {
        let d = DimensionlessParams::new(0.0, g, 0.6);
        let d = d.with_lambda(frac * d.lambda_c_sq().sqrt());
        let a = qfim_single_closed(&d, chi).unwrap().sum_qp();
        let b = qfim_qp_basis(&d, false).unwrap().sum_qp();
        prop_assert!((a - b).abs() < 1e-9 * b);
    }
}
