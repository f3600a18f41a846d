use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix2};

use super::GaussianState;
use crate::error::{Error, Result};
use crate::params::{reduce_angle, require_normal, DimensionlessParams};

/// ρ = R(δ) D(α) S(r, φ) ν(N_th) S† D† R†
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedThermal {
    pub alpha: f64,
    pub delta: f64,
    pub r: f64,
    pub phi: f64,
    pub n_th: f64,
}

struct Pieces {
    /// λ_c² - λ²
    gap: f64,
    radicand: f64,
    num: f64,
    den: f64,
}

fn pieces(d: &DimensionlessParams, chi: f64) -> Result<Pieces> {
    require_normal(d, false)?;
    let l2 = d.lambda * d.lambda;
    let g = d.gamma_t;
    let (s, c) = chi.sin_cos();
    let gap = d.lambda_c_sq() - l2;
    let mut radicand = d.lambda_c_sq() - l2 * g * (2.0 * chi).sin() + l2 * (l2 - 2.0) * s * s;
    if radicand < 0.0 {
        if radicand > -1e-13 * d.lambda_c_sq() {
            radicand = 0.0;
        } else {
            return Err(Error::NegativeRadicand(radicand));
        }
    }
    Ok(Pieces { gap, radicand, num: (l2 - 1.0) * s - g * c, den: g * s - c })
}

pub fn decompose_single(d: &DimensionlessParams, chi: f64) -> Result<SqueezedThermal> {
    let p = pieces(d, chi)?;
    let l2 = d.lambda * d.lambda;
    let s_big = 4.0 * p.gap + l2 * l2;
    let alpha = d.force_t / (2.0 * p.gap) * p.radicand.sqrt();
    let delta = reduce_angle(p.num.atan2(p.den));
    let r = 0.5 * (l2 / s_big.sqrt()).atanh();
    let n_th = 0.5 * (s_big / (4.0 * p.gap)).sqrt() - 0.5;
    // antisqueezed axis sits at ψ = ½ atan2(2γ̃, 2 - λ²) from x
    let psi = 0.5 * (2.0 * d.gamma_t).atan2(2.0 - l2);
    let phi = reduce_angle(psi - FRAC_PI_2 - delta);
    Ok(SqueezedThermal { alpha, delta, r, phi, n_th })
}

pub fn mean_single(s: &SqueezedThermal) -> (f64, f64) {
    let (sd, cd) = s.delta.sin_cos();
    (2.0 * s.alpha * cd, 2.0 * s.alpha * sd)
}

/// Antisqueezed-axis angle θ = φ + δ + π/2.
fn axis_angle(s: &SqueezedThermal) -> f64 {
    s.phi + s.delta + FRAC_PI_2
}

pub fn covariance_single(s: &SqueezedThermal) -> GaussianState {
    let (st, ct) = axis_angle(s).sin_cos();
    let o = Matrix2::new(ct, -st, st, ct);
    let diag = Matrix2::new((2.0 * s.r).exp(), 0.0, 0.0, (-2.0 * s.r).exp());
    let v = (o * diag * o.transpose()) * (1.0 + 2.0 * s.n_th);
    let v = 0.5 * (v + v.transpose());
    let (x, p) = mean_single(s);
    GaussianState::new(DVector::from_vec(vec![x, p]), DMatrix::from_iterator(2, 2, v.iter().copied()))
}

/// Analytic ∂α/∂F̃, ∂α/∂χ and ∂δ/∂χ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionDerivatives {
    pub d_alpha_d_force: f64,
    pub d_alpha_d_chi: f64,
    pub d_delta_d_chi: f64,
}

pub fn decomposition_derivatives(d: &DimensionlessParams, chi: f64) -> Result<DecompositionDerivatives> {
    let p = pieces(d, chi)?;
    if p.radicand == 0.0 {
        return Err(Error::NegativeRadicand(0.0));
    }
    let l2 = d.lambda * d.lambda;
    let g = d.gamma_t;
    let (s, c) = chi.sin_cos();
    let root = p.radicand.sqrt();
    let d_rad = -2.0 * l2 * g * (2.0 * chi).cos() + l2 * (l2 - 2.0) * (2.0 * chi).sin();
    let num_d = (l2 - 1.0) * c + g * s;
    let den_d = g * c + s;
    Ok(DecompositionDerivatives {
        d_alpha_d_force: root / (2.0 * p.gap),
        d_alpha_d_chi: d.force_t / (2.0 * p.gap) * d_rad / (2.0 * root),
        d_delta_d_chi: (num_d * p.den - p.num * den_d) / (p.num * p.num + p.den * p.den),
    })
}
