use nalgebra::{DMatrix, DVector};

use super::GaussianState;
use crate::error::{Error, Result};
use crate::params::{critical_structure, require_normal, DimensionlessParams, EPS_CRIT};

fn check_hopping(d: &DimensionlessParams) -> Result<()> {
    if !(d.kappa_t.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("two-site closed forms need |kappa| < 1, got {}", d.kappa_t)));
    }
    Ok(())
}

/// Mean vector (x₁, p₁, x₂, p₂); both sites carry the symmetric-mode value.
pub fn mean_two_site(d: &DimensionlessParams, chi: f64) -> Result<DVector<f64>> {
    check_hopping(d)?;
    require_normal(d, true)?;
    let lp = critical_structure(d).lambda_plus.expect("kappa > -1");
    let k1 = 1.0 + d.kappa_t;
    let g = d.gamma_t;
    let (s, c) = chi.sin_cos();
    let x = -d.force_t * (k1 * c - g * s) / (k1 * (lp * lp - d.lambda * d.lambda));
    // dx/dt = -γ̃x + (1+κ̃)p + F̃ sin χ = 0 on the symmetric mode
    let p = (g * x - d.force_t * s) / k1;
    Ok(DVector::from_vec(vec![x, p, x, p]))
}

pub fn covariance_two_site(d: &DimensionlessParams) -> Result<DMatrix<f64>> {
    check_hopping(d)?;
    let star = require_normal(d, true)?;
    let cs = critical_structure(d);
    let (lp, lm) = (cs.lambda_plus.unwrap(), cs.lambda_minus.unwrap());
    let (g, k) = (d.gamma_t, d.kappa_t);
    let l2 = d.lambda * d.lambda;
    let (g2, k2) = (g * g, k * k);
    let a = 2.0 * (1.0 - k2) * (lp * lp - l2) * (lm * lm - l2);
    if a.abs() <= EPS_CRIT {
        return Err(Error::CriticalDivergence { lambda: d.lambda, critical: star });
    }

    let v11 = 2.0 * g2 * g2 + g2 * (4.0 * k2 + 4.0 - 3.0 * l2) + (k2 - 1.0) * (2.0 * k2 - (2.0 - 3.0 * l2 + l2 * l2));
    let v22 = 2.0 * g2 * g2
        + (k + 1.0 - l2) * (k - 1.0 + l2) * (2.0 * k2 + l2 - 2.0)
        + g2 * (4.0 * k2 + 4.0 - 5.0 * l2 + l2 * l2);
    let v12 = g * l2 * (g2 + k2 - l2 + 1.0);
    let v13 = k * l2 * (g2 + k2 - 1.0);
    let v24 = k * l2 * ((1.0 - l2).powi(2) - (g2 + k2));
    let v14 = g * k * l2 * (l2 - 2.0);

    #[rustfmt::skip]
    let v = DMatrix::from_row_slice(4, 4, &[
        v11, v12, v13, v14,
        v12, v22, v14, v24,
        v13, v14, v11, v12,
        v14, v24, v12, v22,
    ]);
    Ok(v / a)
}

pub fn two_site_state(d: &DimensionlessParams, chi: f64) -> Result<GaussianState> {
    Ok(GaussianState::new(mean_two_site(d, chi)?, covariance_two_site(d)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{covariance_single, decompose_single, mean_single};
    use crate::params::lambda_plus;
    use std::f64::consts::PI;

    #[test]
    fn identity_at_zero_coupling() {
        for &g in &[0.0, 0.16, 0.8] {
            let v = covariance_two_site(&DimensionlessParams::new(0.0, g, 0.1)).unwrap();
            assert!((v - DMatrix::identity(4, 4)).amax() < 1e-14);
        }
    }

    #[test]
    fn decoupled_sites() {
        let d = DimensionlessParams::new(0.5, 0.16, 0.3);
        let v = covariance_two_site(&d).unwrap();
        let single = covariance_single(&decompose_single(&d, 0.2).unwrap()).cov;
        assert!((v.view((0, 0), (2, 2)) - &single).amax() < 1e-12);
        assert!((v.view((2, 2), (2, 2)) - &single).amax() < 1e-12);
        assert!(v.view((0, 2), (2, 2)).amax() < 1e-15);

        let m = mean_two_site(&d, 1.3).unwrap();
        let (x, p) = mean_single(&decompose_single(&d, 1.3).unwrap());
        assert!((m[0] - x).abs() < 1e-13 && (m[1] - p).abs() < 1e-13);
    }

    // Frozen from an independent numpy/scipy drift solve and Lyapunov solve.
    #[test]
    fn frozen_lyapunov_values() {
        let d = DimensionlessParams::new(0.59, 0.16, 0.13).with_kappa(-0.45);
        let m = mean_two_site(&d, PI / 7.0).unwrap();
        let want_m = [-0.4053898223965587, -0.2204859230340581];
        assert!((m[0] - want_m[0]).abs() < 1e-12 && (m[2] - want_m[0]).abs() < 1e-12);
        assert!((m[1] - want_m[1]).abs() < 1e-12 && (m[3] - want_m[1]).abs() < 1e-12);
        let v = covariance_two_site(&d).unwrap();
        let row0 = [1.4280098582554974, 0.11047637981132372, 0.27254632748126584, 0.0933217833120982];
        let row1 = [0.11047637981132373, 0.8123453155715146, 0.09332178331209837, -0.0695131226628829];
        for j in 0..4 {
            assert!((v[(0, j)] - row0[j]).abs() < 1e-12, "V[0,{j}]");
            assert!((v[(1, j)] - row1[j]).abs() < 1e-12, "V[1,{j}]");
        }
    }

    #[test]
    fn divergence_law() {
        // asymptotic slope of log V₁₁ against log(λ₊ - λ)
        let d = DimensionlessParams::new(0.0, 0.16, 0.1).with_kappa(-0.45);
        let lp = lambda_plus(0.16, -0.45).unwrap();
        let n = 25;
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                let gap = lp * 10f64.powf(-3.0 - 2.0 * t);
                let v = covariance_two_site(&d.with_lambda(lp - gap)).unwrap();
                (gap.ln(), v[(0, 0)].ln())
            })
            .collect();
        let slope = fit_slope(&pts);
        assert!((slope + 1.0).abs() < 0.02, "slope {slope}");
    }

    fn fit_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn parameter_independence() {
        let d = DimensionlessParams::new(0.7, 0.3, 0.1).with_kappa(-0.2);
        assert_eq!(covariance_two_site(&d).unwrap(), covariance_two_site(&d.with_force(2.0)).unwrap());
    }

    #[test]
    fn guards() {
        let lp = lambda_plus(0.16, -0.4).unwrap();
        let d = DimensionlessParams::new(lp, 0.16, 0.1).with_kappa(-0.4);
        assert!(matches!(mean_two_site(&d, 0.0), Err(Error::CriticalDivergence { .. })));
        assert!(covariance_two_site(&d.with_kappa(1.2)).is_err());
    }
}
