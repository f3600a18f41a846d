use std::f64::consts::PI;

use dpsense::analytic::{covariance_single, decompose_single};
use dpsense::dynamics::{
    build_liouvillian, expectations, numeric_qfim_exact, read_density, solve_converged, steady_state,
    write_density, HarnessOptions, MemoryBudget, Model, NumericQfimOptions, SteadyMethod,
};
use dpsense::metrology::qfim_single_closed;
use dpsense::params::{DimensionlessParams, ModelParams};
use dpsense::Error;

fn fig1(lambda: f64, eta: f64) -> DimensionlessParams {
    DimensionlessParams::new(lambda, (1.04f64 * 1.04 - 1.0).sqrt(), 0.38).with_eta(eta)
}

/// Largest relative deviation of the Rabi means and covariance from the closed form.
fn rabi_error(d: &DimensionlessParams, chi: f64) -> f64 {
    let p = ModelParams::from_dimensionless(d, chi, 1, 1.0).unwrap();
    let opts = HarnessOptions { convergence_tol: None, ..Default::default() };
    let rep = solve_converged(&p, &[40], Model::FullRabi, &opts).unwrap();
    let want = covariance_single(&decompose_single(d, chi).unwrap());
    let m = &rep.moments;
    let mean = (&m.means - &want.mean).amax() / want.mean.amax();
    let cov = (&m.cov - &want.cov).amax() / want.cov.amax();
    mean.max(cov)
}

#[test]
fn effective_model_reproduces_gaussian_state() {
    let d = DimensionlessParams::new(0.6, 0.3, 0.5);
    let p = ModelParams::from_dimensionless(&d, 1.1, 1, 1.0).unwrap();
    let rep = solve_converged(&p, &[30], Model::EffectiveQuadratic, &HarnessOptions::default()).unwrap();
    let want = covariance_single(&decompose_single(&d, 1.1).unwrap());
    assert!((&rep.moments.means - &want.mean).amax() < 1e-8);
    assert!((&rep.moments.cov - &want.cov).amax() < 1e-8);
    assert!(rep.cutoff_change.unwrap() < 1e-8);
}

#[test]
fn full_rabi_close_to_closed_form_at_small_eta() {
    let e = rabi_error(&fig1(0.9, 4e-3), PI / 5.0);
    assert!(e < 0.05, "eta 4e-3, lambda 0.9: {e}");
    let d = fig1(0.0, 1e-3);
    let e = rabi_error(&d.with_lambda(0.9 * d.lambda_c_sq().sqrt()), PI / 5.0);
    assert!(e < 0.05, "eta 1e-3, lambda 0.9 lambda_c: {e}");
}

#[test]
fn numeric_qfim_matches_closed_form() {
    let d = DimensionlessParams::new(0.55, 0.4, 0.45);
    let p = ModelParams::from_dimensionless(&d, 0.8, 1, 1.0).unwrap();
    let q = numeric_qfim_exact(&p, &[60], &NumericQfimOptions::default()).unwrap();
    let want = qfim_single_closed(&d, 0.8).unwrap();
    assert!((q.fim - want.fim).amax() / want.fim.amax() < 1e-4, "{} vs {}", q.fim, want.fim);
    assert!((q.commutator_coeff - want.commutator_coeff).abs() / want.commutator_coeff < 1e-4);
}

#[test]
fn truncation_guard_trips_on_small_cutoff() {
    let d = DimensionlessParams::new(0.9, 0.3, 1.5);
    let p = ModelParams::from_dimensionless(&d, 0.3, 1, 1.0).unwrap();
    let opts = HarnessOptions { max_doublings: 0, convergence_tol: None, ..Default::default() };
    match solve_converged(&p, &[6], Model::EffectiveQuadratic, &opts) {
        Err(Error::TruncationUnsafe(t)) => assert!(t > 1e-8),
        other => panic!("expected TruncationUnsafe, got {other:?}"),
    }
}

#[test]
fn budget_is_enforced() {
    let d = DimensionlessParams::new(0.3, 0.3, 0.2);
    let p = ModelParams::from_dimensionless(&d, 0.3, 1, 1.0).unwrap();
    let tiny = MemoryBudget { max_superop_dim: 100 };
    assert!(matches!(build_liouvillian(&p, &[20], Model::EffectiveQuadratic, tiny), Err(Error::BudgetExceeded { .. })));
}

#[test]
fn density_dump_round_trips() {
    let d = DimensionlessParams::new(0.4, 0.5, 0.3);
    let p = ModelParams::from_dimensionless(&d, 0.2, 1, 1.0).unwrap();
    let liou = build_liouvillian(&p, &[8], Model::EffectiveQuadratic, MemoryBudget::default()).unwrap();
    let rho = steady_state(&liou, SteadyMethod::NullSpace).unwrap();
    let path = std::env::temp_dir().join(format!("dpsense_rho_{}.bin", std::process::id()));
    write_density(&path, &rho).unwrap();
    let back = read_density(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back.data, rho.data);
    let a = expectations(&rho).unwrap();
    let b = expectations(&back).unwrap();
    assert_eq!(a.means, b.means);
}
