use nalgebra::{DMatrix, DVector, Matrix2};

use super::{Basis, QfimResult};
use crate::analytic::GaussianState;
use crate::error::{Error, Result};

/// Central-difference settings for mean-vector derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifference {
    /// Step in χ; the F step is `step * max(F, 1)`.
    pub step: f64,
    /// Relative disagreement between h and h/2 above which Richardson extrapolation is used.
    pub richardson_above: f64,
    /// Allowed drift of the covariance under the finite-difference shifts.
    pub cov_tolerance: f64,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self { step: 1e-5, richardson_above: 1e-8, cov_tolerance: 1e-10 }
    }
}

/// F_km = ∂_k dᵀ V⁻¹ ∂_m d
pub fn gaussian_qfim(d_force: &DVector<f64>, d_chi: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Matrix2<f64>> {
    let vi = cov.clone().try_inverse().ok_or(Error::Singular("covariance"))?;
    let a = &vi * d_force;
    let b = &vi * d_chi;
    let off = 0.5 * (d_force.dot(&b) + d_chi.dot(&a));
    Ok(Matrix2::new(d_force.dot(&a), off, off, d_chi.dot(&b)))
}

/// c = 2 ∂_F dᵀ V⁻¹ Ω V⁻¹ ∂_χ d, from L_a = ∂_a dᵀ V⁻¹ (R - d) and [R_k, R_l] = 2iΩ_kl.
pub fn gaussian_commutator(d_force: &DVector<f64>, d_chi: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let vi = cov.clone().try_inverse().ok_or(Error::Singular("covariance"))?;
    let om = GaussianState::symplectic_form(d_force.len() / 2);
    Ok(2.0 * (&vi * d_force).dot(&(&om * (&vi * d_chi))))
}

fn central<F>(f: &F, h: f64) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    let plus = f(h)?;
    let minus = f(-h)?;
    Ok(((&plus.mean - &minus.mean) / (2.0 * h), plus.cov, minus.cov))
}

fn derivative<F>(f: F, h: f64, fd: &FiniteDifference, cov0: &DMatrix<f64>) -> Result<DVector<f64>>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    let (d1, vp, vm) = central(&f, h)?;
    let drift = (&vp - cov0).amax().max((&vm - cov0).amax());
    if drift > fd.cov_tolerance * (1.0 + cov0.amax()) {
        return Err(Error::ParameterDependentCovariance(drift));
    }
    let (d2, _, _) = central(&f, 0.5 * h)?;
    let scale = d2.amax().max(f64::MIN_POSITIVE);
    if (&d1 - &d2).amax() <= fd.richardson_above * scale {
        Ok(d2)
    } else {
        Ok((d2 * 4.0 - d1) / 3.0)
    }
}

/// Finite-difference QFIM of a displaced Gaussian family with parameter-independent covariance.
pub fn qfim_gaussian_numeric<F>(state_fn: F, at: (f64, f64), fd: &FiniteDifference) -> Result<QfimResult>
where
    F: Fn(f64, f64) -> Result<GaussianState>,
{
    let (f0, chi0) = at;
    let center = state_fn(f0, chi0)?;
    let hf = fd.step * f0.abs().max(1.0);
    let d_force = derivative(|h| state_fn(f0 + h, chi0), hf, fd, &center.cov)?;
    let d_chi = derivative(|h| state_fn(f0, chi0 + h), fd.step, fd, &center.cov)?;
    let fim = gaussian_qfim(&d_force, &d_chi, &center.cov)?;
    let fim_inv = fim.try_inverse().ok_or(Error::Singular("QFIM"))?;
    let c = gaussian_commutator(&d_force, &d_chi, &center.cov)?;
    QfimResult::checked(fim, fim_inv, c, Basis::ForcePhase, f0)
}
