use nalgebra::Matrix2;

use super::{Basis, QfimResult};
use crate::error::{Error, Result};
use crate::params::{critical_structure, require_normal, DimensionlessParams};

fn phase_terms(a: f64, gamma_t: f64, chi: f64) -> (f64, f64) {
    let (s2, c2) = (2.0 * chi).sin_cos();
    (a * c2 + 2.0 * gamma_t * s2, a * s2 - 2.0 * gamma_t * c2)
}

pub fn qfim_single_closed(d: &DimensionlessParams, chi: f64) -> Result<QfimResult> {
    require_normal(d, false)?;
    let f = d.force_t;
    if f <= 0.0 {
        return Err(Error::PhaseUnidentifiable);
    }
    let l2 = d.lambda * d.lambda;
    let gap = d.lambda_c_sq() - l2;
    let s = 4.0 * gap + l2 * l2;
    let (q, p) = phase_terms(l2 - 2.0, d.gamma_t, chi);

    let inv_off = -l2 * p / (4.0 * f);
    let fim_inv = Matrix2::new((s + l2 * q) / 4.0, inv_off, inv_off, (s - l2 * q) / (4.0 * f * f));
    let den = gap * s;
    let off = f * l2 * p / den;
    let fim = Matrix2::new((s - l2 * q) / den, off, off, f * f * (s + l2 * q) / den);
    QfimResult::checked(fim, fim_inv, sld_commutator(d), Basis::ForcePhase, f)
}

/// B = 4(1+κ̃)(λ₊² - λ²) + λ⁴ = 4γ̃² + (λ² - 2 - 2κ̃)²
fn two_site_b(d: &DimensionlessParams) -> f64 {
    let a = d.lambda * d.lambda - 2.0 - 2.0 * d.kappa_t;
    4.0 * d.gamma_t * d.gamma_t + a * a
}

fn check_two_site(d: &DimensionlessParams) -> Result<f64> {
    if !(d.kappa_t.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("two-site closed forms need |kappa| < 1, got {}", d.kappa_t)));
    }
    require_normal(d, true)
}

pub fn qfim_two_site_closed(d: &DimensionlessParams, chi: f64) -> Result<QfimResult> {
    check_two_site(d)?;
    let f = d.force_t;
    if f <= 0.0 {
        return Err(Error::PhaseUnidentifiable);
    }
    let l2 = d.lambda * d.lambda;
    let b = two_site_b(d);
    let (q, p) = phase_terms(l2 - 2.0 - 2.0 * d.kappa_t, d.gamma_t, chi);
    let lp = critical_structure(d).lambda_plus.expect("kappa > -1");

    let inv_off = -l2 * p / (8.0 * f);
    let fim_inv = Matrix2::new((b + l2 * q) / 8.0, inv_off, inv_off, (b - l2 * q) / (8.0 * f * f));
    // (κ̃ - κ₊)(κ̃ - κ₋) B
    let den = (1.0 + d.kappa_t) * (lp * lp - l2) * b;
    let off = 2.0 * f * l2 * p / den;
    let fim = Matrix2::new(2.0 * (b - l2 * q) / den, off, off, 2.0 * f * f * (b + l2 * q) / den);
    QfimResult::checked(fim, fim_inv, 16.0 * f / b, Basis::ForcePhase, f)
}

/// QFIM for the shifts (q, p) = F̃(cos χ, sin χ); independent of F̃ and χ.
pub fn qfim_qp_basis(d: &DimensionlessParams, two_site: bool) -> Result<QfimResult> {
    let l2 = d.lambda * d.lambda;
    let (fim_inv, c) = if two_site {
        check_two_site(d)?;
        let b = two_site_b(d);
        let a = l2 - 2.0 - 2.0 * d.kappa_t;
        let off = 2.0 * d.gamma_t * l2 / 8.0;
        (Matrix2::new((b + l2 * a) / 8.0, off, off, (b - l2 * a) / 8.0), 16.0 / b)
    } else {
        require_normal(d, false)?;
        let lc2 = d.lambda_c_sq();
        let off = 0.5 * d.gamma_t * l2;
        let s = 4.0 * (lc2 - l2) + l2 * l2;
        (Matrix2::new(0.5 * (2.0 * lc2 - 3.0 * l2 + l2 * l2), off, off, 0.5 * (2.0 * lc2 - l2)), 8.0 / s)
    };
    let fim = fim_inv.try_inverse().ok_or(Error::Singular("(q, p) inverse QFIM"))?;

    // Jacobian consistency with the (F, χ) closed forms at a reference point
    let (f_ref, chi_ref) = (1.0, 0.37);
    let dref = d.with_force(f_ref);
    let fc = if two_site { qfim_two_site_closed(&dref, chi_ref)? } else { qfim_single_closed(&dref, chi_ref)? };
    let (s, c_) = chi_ref.sin_cos();
    let k = Matrix2::new(c_, -f_ref * s, s, f_ref * c_);
    let mapped = k * fc.fim_inv * k.transpose();
    if (mapped - fim_inv).amax() > 1e-9 * (1.0 + fim_inv.amax()) {
        return Err(Error::Singular("(q, p) basis disagrees with the (F, chi) closed forms"));
    }
    QfimResult::checked(fim, fim_inv, c, Basis::QuadratureShift, d.force_t)
}

/// c = 8F̃ / (4(λ_c² - λ²) + λ⁴)
pub fn sld_commutator(d: &DimensionlessParams) -> f64 {
    let l2 = d.lambda * d.lambda;
    8.0 * d.force_t / (4.0 * (d.lambda_c_sq() - l2) + l2 * l2)
}

/// Limit of [`sld_commutator`] at λ → λ_c: 8F̃ / (1 + γ̃²)².
pub fn commutator_near_critical(gamma_t: f64, force_t: f64) -> f64 {
    8.0 * force_t / (1.0 + gamma_t * gamma_t).powi(2)
}

/// Commutator coefficient for the physical force F = F̃ω; grows as ω is lowered.
pub fn commutator_physical(d: &DimensionlessParams, omega: f64) -> f64 {
    sld_commutator(d) / omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::force_optimal_phase;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    // Frozen from the numpy Gaussian oracle (Lyapunov covariance, exact mean derivatives).
    #[test]
    fn frozen_single() {
        let q = qfim_single_closed(&DimensionlessParams::new(0.9, 0.2857, 0.38), PI / 4.0).unwrap();
        let fim = [2.7037326804751816, -0.7738369297958748, 0.6728135540865618];
        let inv = [0.55135799, 0.6341447368421057, 2.215657825484765];
        for (got, want) in [q.fim[(0, 0)], q.fim[(0, 1)], q.fim[(1, 1)]].iter().zip(fim) {
            assert!((got / want - 1.0).abs() < 1e-12, "{got} {want}");
        }
        for (got, want) in [q.fim_inv[(0, 0)], q.fim_inv[(0, 1)], q.fim_inv[(1, 1)]].iter().zip(inv) {
            assert!((got / want - 1.0).abs() < 1e-12, "{got} {want}");
        }
        assert!((q.commutator_coeff / 1.7445217254816483 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_two_site() {
        let d = DimensionlessParams::new(0.59, 0.16, 0.13).with_kappa(-0.45);
        let q = qfim_two_site_closed(&d, PI / 3.0).unwrap();
        let fim = [9.653486466137432, -0.4871854981501257, 0.33156865510633843];
        let inv = [0.11188626334729447, 0.16439842580272232, 3.2575230267873057];
        for (got, want) in [q.fim[(0, 0)], q.fim[(0, 1)], q.fim[(1, 1)]].iter().zip(fim) {
            assert!((got / want - 1.0).abs() < 1e-12, "{got} {want}");
        }
        for (got, want) in [q.fim_inv[(0, 0)], q.fim_inv[(0, 1)], q.fim_inv[(1, 1)]].iter().zip(inv) {
            assert!((got / want - 1.0).abs() < 1e-12, "{got} {want}");
        }
        assert!((q.commutator_coeff / 3.114921385449344 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idle_bounds() {
        let d = DimensionlessParams::new(0.0, 0.3, 0.5);
        let q = qfim_single_closed(&d, 1.1).unwrap();
        let lc = d.lambda_c_sq().sqrt();
        assert!((q.fim_inv[(0, 0)].sqrt() - lc).abs() < 1e-14);
        assert!((q.fim_inv[(1, 1)].sqrt() - lc / 0.5).abs() < 1e-14);
        assert!(matches!(qfim_single_closed(&d.with_force(0.0), 0.0), Err(Error::PhaseUnidentifiable)));
    }

    #[test]
    fn uncoupled_sites_halve_variance() {
        let d = DimensionlessParams::new(0.7, 0.2, 0.5);
        let one = qfim_single_closed(&d, 0.8).unwrap();
        let two = qfim_two_site_closed(&d, 0.8).unwrap();
        assert!((two.fim_inv - one.fim_inv * 0.5).amax() < 1e-14);
        assert!((two.fim - one.fim * 2.0).amax() < 1e-12);
    }

    #[test]
    fn commutator_limits() {
        assert_eq!(sld_commutator(&DimensionlessParams::new(0.5, 0.2, 0.0)), 0.0);
        let d = DimensionlessParams::new(0.0, 0.4, 0.3);
        let lc = d.lambda_c_sq().sqrt();
        let near = sld_commutator(&d.with_lambda(lc));
        assert!((near / commutator_near_critical(0.4, 0.3) - 1.0).abs() < 1e-14);
        assert!((commutator_physical(&d, 2.0) - sld_commutator(&d) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn qp_examples() {
        for &g in &[0.0, 0.16, 0.7] {
            let d = DimensionlessParams::new(0.0, g, 0.2);
            let q = qfim_qp_basis(&d, false).unwrap();
            assert!((q.sum_qp() - 2.0 * d.lambda_c_sq()).abs() < 1e-14);
        }
        let d = DimensionlessParams::new(0.0, 0.6, 0.2);
        let lc = d.lambda_c_sq().sqrt();
        let q = qfim_qp_basis(&d.with_lambda(lc * (1.0 - 1e-7)), false).unwrap();
        assert!((q.sum_qp() / (0.5 * lc.powi(4)) - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn inverse_consistency(frac in 0.0..0.999f64, g in 0.0..2.0f64, f in 0.01..3.0f64, chi in -PI..PI) {
            let d = DimensionlessParams::new(0.0, g, f);
            let d = d.with_lambda(frac * d.lambda_c_sq().sqrt());
            let q = qfim_single_closed(&d, chi).unwrap();
            prop_assert!(q.inverse_consistency() < 1e-10 * (1.0 + q.fim.amax() * q.fim_inv.amax()));
            prop_assert!(q.fim.determinant() > 0.0 && q.fim[(0, 0)] > 0.0);
            prop_assert!(q.commutator_coeff > 0.0);
        }

        #[test]
        fn inverse_consistency_two_site(frac in 0.0..0.999f64, g in 0.0..0.9f64, k in -0.9..0.9f64,
                                        f in 0.01..3.0f64, chi in -PI..PI) {
            let d = DimensionlessParams::new(0.0, g, f).with_kappa(k);
            let star = crate::params::critical_structure(&d).critical_coupling(true).unwrap();
            let d = d.with_lambda(frac * star);
            let q = qfim_two_site_closed(&d, chi).unwrap();
            prop_assert!(q.inverse_consistency() < 1e-10 * (1.0 + q.fim.amax() * q.fim_inv.amax()));
            prop_assert!(q.fim.determinant() > 0.0);
        }

        #[test]
        fn basis_consistency(frac in 0.0..0.99f64, g in 0.0..1.5f64, f in 0.05..3.0f64, chi in -PI..PI,
                             two in proptest::bool::ANY, k in -0.6..0.6f64) {
            let mut d = DimensionlessParams::new(0.0, g, f);
            if two { d = d.with_kappa(k); }
            let star = crate::params::critical_structure(&d).critical_coupling(two).unwrap();
            let d = d.with_lambda(frac * star);
            let fc = if two { qfim_two_site_closed(&d, chi) } else { qfim_single_closed(&d, chi) }.unwrap();
            let qp = qfim_qp_basis(&d, two).unwrap();
            // (F, χ) → (q, p) Jacobian: F_(q,p) = J^{-T} F_(F,χ) J^{-1} with J = ∂(q,p)/∂(F,χ)
            let (s, c) = chi.sin_cos();
            let j = Matrix2::new(c, -f * s, s, f * c);
            let ji = j.try_inverse().unwrap();
            let mapped = ji.transpose() * fc.fim * ji;
            prop_assert!((mapped - qp.fim).amax() < 1e-10 * (1.0 + qp.fim.amax()));
            // and the (q, p) QFIM does not depend on F̃ or χ
            let other = qfim_qp_basis(&d.with_force(f * 1.7 + 0.1), two).unwrap();
            prop_assert_eq!(other.fim, qp.fim);
        }

        #[test]
        fn off_diagonal_vanishes_at_optimal_phase(frac in 0.0..0.999f64, g in 0.0..1.5f64, f in 0.05..3.0f64) {
            let d = DimensionlessParams::new(0.0, g, f);
            let d = d.with_lambda(frac * d.lambda_c_sq().sqrt());
            let q = qfim_single_closed(&d, force_optimal_phase(&d, false)).unwrap();
            let scale = (q.fim_inv[(0, 0)] * q.fim_inv[(1, 1)]).sqrt();
            prop_assert!(q.fim_inv[(0, 1)].abs() < 1e-12 * scale);
        }
    }
}
