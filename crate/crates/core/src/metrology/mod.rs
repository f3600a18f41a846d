//! QFIM, SLD and Cramér-Rao machinery. Parameter order is (F, χ) or (q, p) with
//! q = F̃ cos χ, p = F̃ sin χ.

mod closed;
mod gaussian;
mod sld;

pub use closed::{
    commutator_near_critical, commutator_physical, qfim_qp_basis, qfim_single_closed, qfim_two_site_closed,
    sld_commutator,
};
pub use gaussian::{gaussian_commutator, gaussian_qfim, qfim_gaussian_numeric, FiniteDifference};
pub use sld::{qfim_from_slds, sld_fock, sld_residuals, FockSld, SldResiduals};

use nalgebra::Matrix2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    ForcePhase,
    QuadratureShift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfimResult {
    pub fim: Matrix2<f64>,
    pub fim_inv: Matrix2<f64>,
    /// c in [L_1, L_2] = i c 1
    pub commutator_coeff: f64,
    pub basis: Basis,
    /// Force at which a (F, χ) result was evaluated; converts to the (q, p) sum.
    pub force_t: f64,
}

impl QfimResult {
    pub(crate) fn checked(fim: Matrix2<f64>, fim_inv: Matrix2<f64>, c: f64, basis: Basis, force_t: f64) -> Result<Self> {
        let dev = (fim * fim_inv - Matrix2::identity()).amax();
        if !(dev < 1e-8) {
            return Err(Error::Singular("QFIM and its closed-form inverse disagree"));
        }
        Ok(Self { fim, fim_inv, commutator_coeff: c, basis, force_t })
    }

    pub fn inverse_consistency(&self) -> f64 {
        (self.fim * self.fim_inv - Matrix2::identity()).amax()
    }

    /// δq² + δp² per repetition.
    pub fn sum_qp(&self) -> f64 {
        match self.basis {
            Basis::QuadratureShift => self.fim_inv.trace(),
            // K diag(1, F) rotation Jacobian: tr(K F⁻¹ Kᵀ) = F⁻¹_FF + F² F⁻¹_χχ
            Basis::ForcePhase => self.fim_inv[(0, 0)] + self.force_t * self.force_t * self.fim_inv[(1, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbReport {
    pub nu: u32,
    /// None for a (q, p) basis result.
    pub d_force: Option<f64>,
    pub d_chi: Option<f64>,
    pub dq2_plus_dp2: f64,
    pub sql_bound: f64,
    pub beats_sql: bool,
}

pub fn crb_report(q: &QfimResult, nu: u32, two_site: bool) -> Result<CrbReport> {
    if nu == 0 {
        return Err(Error::InvalidParameter("nu must be at least 1".into()));
    }
    let n = nu as f64;
    let (d_force, d_chi) = match q.basis {
        Basis::ForcePhase => (Some((q.fim_inv[(0, 0)] / n).sqrt()), Some((q.fim_inv[(1, 1)] / n).sqrt())),
        Basis::QuadratureShift => (None, None),
    };
    let sum = q.sum_qp() / n;
    let sql_bound = if two_site { 1.0 / n } else { 2.0 / n };
    Ok(CrbReport { nu, d_force, d_chi, dq2_plus_dp2: sum, sql_bound, beats_sql: sum < sql_bound })
}
