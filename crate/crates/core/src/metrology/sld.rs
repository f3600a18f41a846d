use nalgebra::{DMatrix, Matrix2};

use crate::analytic::{decompose_single, decomposition_derivatives, SqueezedThermal};
use crate::error::{Error, Result};
use crate::fock::{annihilation, thermal_populations, unitary_from_generator};
use crate::params::DimensionlessParams;
use crate::C64;

/// Largest Fock-tail mass beyond the cutoff accepted by [`sld_fock`].
pub const TAIL_GUARD: f64 = 1e-10;

/// Steady state and SLDs on Fock levels 0..=cutoff.
#[derive(Debug, Clone)]
pub struct FockSld {
    pub rho: DMatrix<C64>,
    pub l_force: DMatrix<C64>,
    pub l_chi: DMatrix<C64>,
    pub tail_mass: f64,
}

struct Dressing {
    u: DMatrix<C64>,
    rho: DMatrix<C64>,
    a: DMatrix<C64>,
}

fn work_dim(cutoff: usize) -> usize {
    2 * cutoff + 24
}

/// U = R(δ) D(α) S(r e^{2iφ}) and ρ = U ν U† on a padded space.
fn dress(s: &SqueezedThermal, nw: usize) -> Dressing {
    let i = C64::i();
    let a = annihilation(nw);
    let ad = a.adjoint();
    let rot = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(nw, |n, _| (i * (s.delta * n as f64)).exp()));
    let disp = unitary_from_generator(&((&ad - &a) * (i * s.alpha)));
    let xi = C64::from_polar(s.r, 2.0 * s.phi);
    let a2 = &a * &a;
    let ad2 = &ad * &ad;
    let sq = unitary_from_generator(&((a2 * xi.conj() - ad2 * xi) * (i * 0.5)));
    let u = rot * disp * sq;
    let pops = thermal_populations(s.n_th, nw);
    let nu = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(nw, |n, _| C64::new(pops[n], 0.0)));
    let rho = &u * nu * u.adjoint();
    Dressing { u, rho, a }
}

fn tail(rho: &DMatrix<C64>, from: usize) -> f64 {
    (from..rho.nrows()).map(|n| rho[(n, n)].re.max(0.0)).sum()
}

fn truncate(m: &DMatrix<C64>, cutoff: usize) -> DMatrix<C64> {
    m.view((0, 0), (cutoff + 1, cutoff + 1)).into_owned()
}

fn fock_rho(s: &SqueezedThermal, cutoff: usize) -> Result<(DMatrix<C64>, f64)> {
    let nw = work_dim(cutoff);
    let dr = dress(s, nw);
    check_tails(&dr.rho, cutoff)?;
    Ok((truncate(&dr.rho, cutoff), tail(&dr.rho, cutoff + 1)))
}

fn check_tails(rho: &DMatrix<C64>, cutoff: usize) -> Result<()> {
    let beyond = tail(rho, cutoff + 1);
    let edge = tail(rho, rho.nrows() - 8);
    if beyond > TAIL_GUARD || edge > 1e-14 {
        return Err(Error::TruncationUnsafe(beyond.max(edge)));
    }
    Ok(())
}

/// SLDs L_F = 2∂α/∂F̃ /(1+2N) · U(β↠+ β*â)U† and L_χ = 2/(1+2N) · U(υ↠+ υ*â)U†,
/// β = β(r, φ) = cosh r + e^{2iφ} sinh r, υ = ∂α/∂χ β(r, φ) + iα ∂δ/∂χ β(-r, φ).
pub fn sld_fock(s: &SqueezedThermal, d: &DimensionlessParams, chi: f64, cutoff: usize) -> Result<FockSld> {
    if cutoff < 4 {
        return Err(Error::InvalidParameter("cutoff must be at least 4".into()));
    }
    let der = decomposition_derivatives(d, chi)?;
    let nw = work_dim(cutoff);
    let dr = dress(s, nw);
    check_tails(&dr.rho, cutoff)?;

    let e2 = C64::from_polar(1.0, 2.0 * s.phi);
    let beta = |r: f64| C64::new(r.cosh(), 0.0) + e2 * r.sinh();
    let ups = beta(s.r) * der.d_alpha_d_force;
    let ups_chi = beta(s.r) * der.d_alpha_d_chi + C64::i() * beta(-s.r) * (s.alpha * der.d_delta_d_chi);
    let ad = dr.a.adjoint();
    let quad = |v: C64| -> DMatrix<C64> {
        let x = &ad * v + &dr.a * v.conj();
        &dr.u * x * dr.u.adjoint()
    };
    let pref = 2.0 / (1.0 + 2.0 * s.n_th);
    let l_force = quad(ups) * C64::new(pref, 0.0);
    let l_chi = quad(ups_chi) * C64::new(pref, 0.0);
    Ok(FockSld {
        rho: truncate(&dr.rho, cutoff),
        l_force: truncate(&l_force, cutoff),
        l_chi: truncate(&l_chi, cutoff),
        tail_mass: tail(&dr.rho, cutoff + 1),
    })
}

/// QFIM ½tr(ρ{L_a, L_b}) and c = tr(ρ[L_F, L_χ]) / i.
pub fn qfim_from_slds(rho: &DMatrix<C64>, l_force: &DMatrix<C64>, l_chi: &DMatrix<C64>) -> (Matrix2<f64>, f64) {
    let tr = |a: &DMatrix<C64>, b: &DMatrix<C64>| (rho * a * b).trace();
    let ff = tr(l_force, l_force).re;
    let cc = tr(l_chi, l_chi).re;
    let fc = tr(l_force, l_chi);
    let cf = tr(l_chi, l_force);
    let off = 0.5 * (fc + cf).re;
    (Matrix2::new(ff, off, off, cc), (fc - cf).im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SldResiduals {
    pub force: f64,
    pub chi: f64,
}

/// ‖2∂_aρ - {L_a, ρ}‖_F with ∂_aρ from central differences of the Fock-space state.
pub fn sld_residuals(d: &DimensionlessParams, chi: f64, cutoff: usize, step: f64) -> Result<SldResiduals> {
    let s = decompose_single(d, chi)?;
    let sld = sld_fock(&s, d, chi, cutoff)?;
    let rho_at = |f: f64, c: f64| -> Result<DMatrix<C64>> {
        Ok(fock_rho(&decompose_single(&d.with_force(f), c)?, cutoff)?.0)
    };
    let hf = step * d.force_t.max(1.0);
    let drho_f = (rho_at(d.force_t + hf, chi)? - rho_at(d.force_t - hf, chi)?) / C64::new(2.0 * hf, 0.0);
    let drho_c = (rho_at(d.force_t, chi + step)? - rho_at(d.force_t, chi - step)?) / C64::new(2.0 * step, 0.0);
    let resid = |drho: DMatrix<C64>, l: &DMatrix<C64>| {
        (drho * C64::new(2.0, 0.0) - (l * &sld.rho + &sld.rho * l)).norm()
    };
    Ok(SldResiduals { force: resid(drho_f, &sld.l_force), chi: resid(drho_c, &sld.l_chi) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::qfim_single_closed;

    #[test]
    fn vacuum_probe_gives_rotated_quadrature() {
        let d = DimensionlessParams::new(0.0, 0.0, 0.6);
        let chi = 0.7;
        let s = decompose_single(&d, chi).unwrap();
        let sld = sld_fock(&s, &d, chi, 30).unwrap();
        let a = annihilation(31);
        let rotated = a.adjoint() * C64::from_polar(1.0, s.delta) + &a * C64::from_polar(1.0, -s.delta);
        let shifted = rotated - DMatrix::identity(31, 31) * C64::new(2.0 * s.alpha, 0.0);
        assert!((sld.l_force.view((0, 0), (29, 29)) - shifted.view((0, 0), (29, 29))).camax() < 1e-10);
    }

    #[test]
    fn residual_and_trace_qfim() {
        let d = DimensionlessParams::new(0.7, 0.3, 0.5);
        let chi = 1.1;
        let r = sld_residuals(&d, chi, 50, 1e-5).unwrap();
        assert!(r.force < 1e-6 && r.chi < 1e-6, "{r:?}");

        let s = decompose_single(&d, chi).unwrap();
        let sld = sld_fock(&s, &d, chi, 50).unwrap();
        let (fim, c) = qfim_from_slds(&sld.rho, &sld.l_force, &sld.l_chi);
        let closed = qfim_single_closed(&d, chi).unwrap();
        assert!((fim - closed.fim).amax() / closed.fim.amax() < 1e-6);
        assert!((c / closed.commutator_coeff - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tail_guard() {
        let d = DimensionlessParams::new(0.9, 0.2857, 2.0);
        let s = decompose_single(&d, 0.0).unwrap();
        assert!(matches!(sld_fock(&s, &d, 0.0, 8), Err(Error::TruncationUnsafe(_))));
    }
}
