use nalgebra::DMatrix;

use super::density::DEFAULT_TAIL_GUARD;
use super::liouvillian::{build_liouvillian, MemoryBudget, Model};
use super::steady::{steady_state_with, SteadyMethod, SteadyOptions};
use crate::error::{Error, Result};
use crate::metrology::{qfim_from_slds, Basis, QfimResult};
use crate::params::ModelParams;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericQfimOptions {
    pub model: Model,
    pub method: SteadyMethod,
    pub steady: SteadyOptions,
    pub budget: MemoryBudget,
    /// Central-difference step: F̃ uses step·max(F̃, 1), χ uses step.
    pub step: f64,
    /// Eigenvalue-sum cutoff of the spectral SLD formula.
    pub tol_eig: f64,
    /// Target relative accuracy; a step-halving mismatch above 10× aborts.
    pub tolerance: f64,
    pub tail_guard: f64,
}

impl Default for NumericQfimOptions {
    fn default() -> Self {
        Self {
            model: Model::EffectiveQuadratic,
            method: SteadyMethod::Auto,
            steady: SteadyOptions::default(),
            budget: MemoryBudget::default(),
            step: 1e-4,
            tol_eig: 1e-12,
            tolerance: 1e-4,
            tail_guard: DEFAULT_TAIL_GUARD,
        }
    }
}

/// Boson-reduced steady state at physical parameters `p`.
fn boson_state(p: &ModelParams, cutoffs: &[usize], o: &NumericQfimOptions) -> Result<DMatrix<C64>> {
    let liou = build_liouvillian(p, cutoffs, o.model, o.budget)?;
    let rho = steady_state_with(&liou, o.method, &o.steady)?;
    let tail = rho.fock_tail_mass();
    if tail > o.tail_guard {
        return Err(Error::TruncationUnsafe(tail));
    }
    Ok(rho.trace_spins().data)
}

/// Richardson-combined central difference; the step-halving mismatch is checked.
fn derivative(at: impl Fn(f64) -> Result<DMatrix<C64>>, x: f64, h: f64, tolerance: f64) -> Result<DMatrix<C64>> {
    let central = |h: f64| -> Result<DMatrix<C64>> { Ok((at(x + h)? - at(x - h)?) / C64::new(2.0 * h, 0.0)) };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    let scale = fine.norm().max(1e-300);
    let mismatch = (&fine - &coarse).norm() / scale;
    if mismatch > 10.0 * tolerance {
        return Err(Error::DerivativeMismatch(mismatch));
    }
    Ok((fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0))
}

/// SLDs in the eigenbasis of ρ: ⟨m|L|n⟩ = 2⟨m|∂ρ|n⟩/(p_m + p_n) for p_m + p_n > tol_eig.
pub fn spectral_slds(
    rho: &DMatrix<C64>,
    derivs: &[&DMatrix<C64>],
    tol_eig: f64,
) -> Result<Vec<DMatrix<C64>>> {
    let eig = rho.clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let p = &eig.eigenvalues;
    let n = rho.nrows();
    let mut out = Vec::with_capacity(derivs.len());
    for dr in derivs {
        let db = u.adjoint() * *dr * u;
        let mut l = DMatrix::<C64>::zeros(n, n);
        let mut dropped = 0.0;
        for m in 0..n {
            for k in 0..n {
                let s = p[m] + p[k];
                if s > tol_eig {
                    l[(m, k)] = db[(m, k)] * (2.0 / s);
                } else {
                    dropped += db[(m, k)].norm_sqr();
                }
            }
        }
        let total = db.norm_squared().max(1e-300);
        if dropped / total > 1e-6 {
            return Err(Error::IllConditioned(dropped / total));
        }
        out.push(u * l * u.adjoint());
    }
    Ok(out)
}

/// QFIM in the (F̃, χ) basis from finite differences of exact steady states.
pub fn numeric_qfim_exact(p: &ModelParams, cutoffs: &[usize], opts: &NumericQfimOptions) -> Result<QfimResult> {
    p.validate()?;
    let force_t = p.force / p.omega;
    let rho = boson_state(p, cutoffs, opts)?;
    let hf = opts.step * force_t.max(1.0);
    let d_force = derivative(|f| boson_state(&p.with_force(f * p.omega), cutoffs, opts), force_t, hf, opts.tolerance)?;
    let d_chi = derivative(|c| boson_state(&p.with_chi(c), cutoffs, opts), p.chi, opts.step, opts.tolerance)?;
    let l = spectral_slds(&rho, &[&d_force, &d_chi], opts.tol_eig)?;
    let (fim, c) = qfim_from_slds(&rho, &l[0], &l[1]);
    let inv = fim.try_inverse().ok_or(Error::Singular("numeric QFIM"))?;
    QfimResult::checked(fim, inv, c, Basis::ForcePhase, force_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::qfim_single_closed;
    use crate::params::DimensionlessParams;

    #[test]
    fn idle_probe_bounds() {
        let d = DimensionlessParams::new(0.0, 0.3, 0.5);
        let p = ModelParams::from_dimensionless(&d, 0.7, 1, 1.0).unwrap();
        let q = numeric_qfim_exact(&p, &[20], &NumericQfimOptions::default()).unwrap();
        let want = qfim_single_closed(&d, 0.7).unwrap();
        assert!((q.fim - want.fim).amax() / want.fim.amax() < 1e-6, "{} vs {}", q.fim, want.fim);
    }

    #[test]
    fn spectral_sld_of_pure_state_drops_nothing_physical() {
        let mut rho = DMatrix::<C64>::zeros(3, 3);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        let mut dr = DMatrix::<C64>::zeros(3, 3);
        dr[(0, 1)] = C64::new(0.5, 0.0);
        dr[(1, 0)] = C64::new(0.5, 0.0);
        let l = spectral_slds(&rho, &[&dr], 1e-12).unwrap();
        let back = (&l[0] * &rho + &rho * &l[0]) * C64::new(0.5, 0.0);
        assert!((back - dr).camax() < 1e-14);
    }
}
