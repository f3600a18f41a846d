//! Model parameters, their dimensionless reduction and the critical structure.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default relative tolerance around a critical coupling.
pub const EPS_CRIT: f64 = 1e-9;

/// Reduce an angle to (-π, π].
pub fn reduce_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Physical couplings of the driven dissipative Rabi lattice (ħ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub omega: f64,
    pub omega_spin: f64,
    pub g: f64,
    pub force: f64,
    /// Displacement phase, kept in (-π, π].
    pub chi: f64,
    /// Per-site decay rates, one per site.
    pub gamma: Vec<f64>,
    pub kappa: f64,
    pub n_sites: usize,
}

impl ModelParams {
    pub fn new(
        omega: f64,
        omega_spin: f64,
        g: f64,
        force: f64,
        chi: f64,
        gamma: Vec<f64>,
        kappa: f64,
    ) -> Result<Self> {
        let p = Self {
            omega,
            omega_spin,
            g,
            force,
            chi: reduce_angle(chi),
            n_sites: gamma.len(),
            gamma,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    /// Physical parameters with ω = `omega` reproducing `d` on `n_sites` sites.
    pub fn from_dimensionless(d: &DimensionlessParams, chi: f64, n_sites: usize, omega: f64) -> Result<Self> {
        d.validate()?;
        if n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be positive".into()));
        }
        let omega_spin = omega / d.eta;
        Self::new(
            omega,
            omega_spin,
            0.5 * d.lambda * (omega * omega_spin).sqrt(),
            d.force_t * omega,
            chi,
            vec![d.gamma_t * omega; n_sites],
            d.kappa_t * omega,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !(self.omega_spin > 0.0) {
            return bad("Omega must be positive");
        }
        if !(self.force >= 0.0) {
            return bad("force must be non-negative");
        }
        if self.n_sites == 0 || self.gamma.len() != self.n_sites {
            return bad("gamma must list one rate per site");
        }
        if self.gamma.iter().any(|g| !(*g >= 0.0)) {
            return bad("decay rates must be non-negative");
        }
        if !self.g.is_finite() || !self.kappa.is_finite() || !self.chi.is_finite() {
            return bad("couplings must be finite");
        }
        Ok(())
    }

    pub fn uniform_decay(&self) -> Option<f64> {
        let g0 = *self.gamma.first()?;
        self.gamma.iter().all(|g| *g == g0).then_some(g0)
    }

    pub fn with_force(&self, force: f64) -> Self {
        Self { force, ..self.clone() }
    }

    pub fn with_chi(&self, chi: f64) -> Self {
        Self { chi: reduce_angle(chi), ..self.clone() }
    }
}

/// Reduced couplings in units of ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams {
    /// 2g/√(ωΩ)
    pub lambda: f64,
    pub gamma_t: f64,
    pub force_t: f64,
    pub kappa_t: f64,
    /// ω/Ω
    pub eta: f64,
}

impl DimensionlessParams {
    /// Single-site parameters with zero hopping and η = 4e-3.
    pub fn new(lambda: f64, gamma_t: f64, force_t: f64) -> Self {
        Self { lambda, gamma_t, force_t, kappa_t: 0.0, eta: 4e-3 }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
    pub fn with_gamma(self, gamma_t: f64) -> Self {
        Self { gamma_t, ..self }
    }
    pub fn with_force(self, force_t: f64) -> Self {
        Self { force_t, ..self }
    }
    pub fn with_kappa(self, kappa_t: f64) -> Self {
        Self { kappa_t, ..self }
    }
    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    /// λ for a given g/ω at this η: λ = 2 (g/ω) √η.
    pub fn lambda_from_g_over_omega(g_over_omega: f64, eta: f64) -> f64 {
        2.0 * g_over_omega * eta.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.gamma_t >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if !(self.force_t >= 0.0) {
            return bad("force must be non-negative");
        }
        if !self.kappa_t.is_finite() {
            return bad("kappa must be finite");
        }
        Ok(())
    }

    /// λ_c² = 1 + γ̃²
    pub fn lambda_c_sq(&self) -> f64 {
        1.0 + self.gamma_t * self.gamma_t
    }
}

pub fn derive_dimensionless(p: &ModelParams) -> Result<DimensionlessParams> {
    if p.omega == 0.0 || p.omega_spin == 0.0 {
        return Err(Error::InvalidParameter("omega and Omega must be non-zero".into()));
    }
    p.validate()?;
    let gamma = p
        .uniform_decay()
        .ok_or_else(|| Error::InvalidParameter("reduced parameters need a uniform decay rate".into()))?;
    Ok(DimensionlessParams {
        lambda: 2.0 * p.g.abs() / (p.omega * p.omega_spin).sqrt(),
        gamma_t: gamma / p.omega,
        force_t: p.force / p.omega,
        kappa_t: p.kappa / p.omega,
        eta: p.omega / p.omega_spin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalStructure {
    pub lambda_c: f64,
    /// None when κ̃ ≤ -1 (estimation disabled).
    pub lambda_plus: Option<f64>,
    /// None when κ̃ ≥ 1.
    pub lambda_minus: Option<f64>,
    /// None when λ⁴ < 4γ̃².
    pub kappa_plus: Option<f64>,
    pub kappa_minus: Option<f64>,
    /// Force-optimal phase at the critical coupling; χ_opt + π/2 is phase-optimal.
    pub chi_opt: f64,
}

impl CriticalStructure {
    pub fn estimation_enabled(&self) -> bool {
        self.lambda_plus.is_some()
    }

    /// Lower edge of the normal phase: λ_c for one site, min(λ₊, λ₋) for two.
    pub fn critical_coupling(&self, two_site: bool) -> Option<f64> {
        if !two_site {
            return Some(self.lambda_c);
        }
        match (self.lambda_plus, self.lambda_minus) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            _ => None,
        }
    }
}

/// λ₊(κ̃) = √(γ̃² + (1+κ̃)²)/√(1+κ̃)
pub fn lambda_plus(gamma_t: f64, kappa_t: f64) -> Option<f64> {
    let s = 1.0 + kappa_t;
    (s > 0.0).then(|| ((gamma_t * gamma_t + s * s) / s).sqrt())
}

/// λ₋(κ̃) = λ₊(-κ̃)
pub fn lambda_minus(gamma_t: f64, kappa_t: f64) -> Option<f64> {
    lambda_plus(gamma_t, -kappa_t)
}

/// Phase on the δF-minimizing root of tan 2χ = 2γ̃/a, i.e. a cos 2χ + 2γ̃ sin 2χ = -√(a² + 4γ̃²).
pub fn force_optimal_root(a: f64, gamma_t: f64) -> f64 {
    0.5 * reduce_angle((2.0 * gamma_t).atan2(a) + PI)
}

/// χ minimizing δF at the working coupling, a = λ² - 2 - 2κ̃ (κ̃ = 0 for one site).
pub fn force_optimal_phase(d: &DimensionlessParams, two_site: bool) -> f64 {
    let k = if two_site { d.kappa_t } else { 0.0 };
    force_optimal_root(d.lambda * d.lambda - 2.0 - 2.0 * k, d.gamma_t)
}

pub fn critical_structure(d: &DimensionlessParams) -> CriticalStructure {
    let g = d.gamma_t;
    let k = d.kappa_t;
    let lambda_c = d.lambda_c_sq().sqrt();
    let lp = lambda_plus(g, k);
    let lm = lambda_minus(g, k);
    let l2 = d.lambda * d.lambda;
    let disc = l2 * l2 - 4.0 * g * g;
    let (kappa_plus, kappa_minus) = if disc >= 0.0 {
        let s = disc.sqrt();
        (Some(0.5 * (l2 - 2.0 + s)), Some(0.5 * (l2 - 2.0 - s)))
    } else {
        (None, None)
    };
    let star = lp.unwrap_or(lambda_c);
    let chi_opt = force_optimal_root(star * star - 2.0 - 2.0 * k, g);
    CriticalStructure { lambda_c, lambda_plus: lp, lambda_minus: lm, kappa_plus, kappa_minus, chi_opt }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRegion {
    Normal,
    Critical,
    Superradiant,
}

pub fn phase_region(d: &DimensionlessParams, two_site: bool) -> PhaseRegion {
    phase_region_with(d, two_site, EPS_CRIT)
}

pub fn phase_region_with(d: &DimensionlessParams, two_site: bool, eps_crit: f64) -> PhaseRegion {
    let cs = critical_structure(d);
    let Some(star) = cs.critical_coupling(two_site) else {
        return PhaseRegion::Superradiant;
    };
    let tol = eps_crit * star;
    if (d.lambda - star).abs() <= tol {
        PhaseRegion::Critical
    } else if d.lambda < star {
        PhaseRegion::Normal
    } else {
        PhaseRegion::Superradiant
    }
}

/// Ok(λ*) in the normal phase, CriticalDivergence otherwise.
pub(crate) fn require_normal(d: &DimensionlessParams, two_site: bool) -> Result<f64> {
    d.validate()?;
    let cs = critical_structure(d);
    let star = cs.critical_coupling(two_site).unwrap_or(0.0);
    match phase_region(d, two_site) {
        PhaseRegion::Normal => Ok(star),
        _ => Err(Error::CriticalDivergence { lambda: d.lambda, critical: star }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratios() {
        let p = ModelParams::new(1.0, 250.0, 0.5, 0.0, 0.0, vec![0.0], 0.0).unwrap();
        let d = derive_dimensionless(&p).unwrap();
        assert!((d.lambda - 1.0 / 250f64.sqrt()).abs() < 1e-15);
        assert!((d.eta - 4e-3).abs() < 1e-18);

        let p = ModelParams::new(2.0, 250.0, 0.5, 0.0, 0.0, vec![0.32], 0.0).unwrap();
        assert!((derive_dimensionless(&p).unwrap().gamma_t - 0.16).abs() < 1e-16);
    }

    #[test]
    fn fig3_eta() {
        let d = DimensionlessParams::new(0.0, 0.16, 0.13).with_eta(4e-3);
        let lambda = DimensionlessParams::lambda_from_g_over_omega(3.9, 4e-3);
        let p = ModelParams::from_dimensionless(&d.with_lambda(lambda), 0.0, 1, 1.0).unwrap();
        assert!((p.omega_spin - 250.0).abs() < 1e-12);
        let back = derive_dimensionless(&p).unwrap();
        assert!((back.eta - 4e-3).abs() < 1e-17);
        assert!((back.lambda - lambda).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_frequencies() {
        let mut p = ModelParams::new(1.0, 1.0, 0.1, 0.0, 0.0, vec![0.1], 0.0).unwrap();
        p.omega_spin = 0.0;
        assert!(derive_dimensionless(&p).is_err());
        assert!(ModelParams::new(0.0, 1.0, 0.1, 0.0, 0.0, vec![0.1], 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.1, -1.0, 0.0, vec![0.1], 0.0).is_err());
    }

    #[test]
    fn chi_reduced() {
        let p = ModelParams::new(1.0, 1.0, 0.1, 0.0, 3.0 * PI, vec![0.1], 0.0).unwrap();
        assert!((p.chi - PI).abs() < 1e-12);
        assert_eq!(reduce_angle(-PI), PI);
    }

    #[test]
    fn critical_examples() {
        let cs = critical_structure(&DimensionlessParams::new(0.5, 0.2857, 0.38));
        assert!((cs.lambda_c - 1.04).abs() < 1e-3);

        let d = DimensionlessParams::new(0.5, 0.16, 0.1);
        let cs = critical_structure(&d);
        let want = 1.0256f64.sqrt();
        assert!((cs.lambda_c - want).abs() < 1e-15);
        assert!((cs.lambda_plus.unwrap() - want).abs() < 1e-15);
        assert!((cs.lambda_minus.unwrap() - want).abs() < 1e-15);

        let cs = critical_structure(&DimensionlessParams::new(0.59, 0.16, 0.1));
        assert!(cs.kappa_plus.is_some() && cs.kappa_minus.is_some());
        // frozen: ½(λ² - 2 ± √(λ⁴ - 4γ̃²)) at λ = 0.59, γ̃ = 0.16
        assert!((cs.kappa_plus.unwrap() - (-0.757_441_588_107_736_8)).abs() < 1e-12);
        assert!((cs.kappa_minus.unwrap() - (-0.894_458_411_892_263_2)).abs() < 1e-12);

        let cs = critical_structure(&DimensionlessParams::new(0.3, 0.16, 0.1));
        assert!(cs.kappa_plus.is_none());
        let cs = critical_structure(&DimensionlessParams::new(0.3, 0.16, 0.1).with_kappa(-1.0));
        assert!(cs.lambda_plus.is_none() && !cs.estimation_enabled());
    }

    #[test]
    fn regions() {
        let d = DimensionlessParams::new(0.95 * 1.04, 0.2857, 0.38);
        assert_eq!(phase_region(&d, false), PhaseRegion::Normal);
        let lc = d.lambda_c_sq().sqrt();
        assert_eq!(phase_region(&d.with_lambda(lc), false), PhaseRegion::Critical);
        assert_eq!(phase_region(&d.with_lambda(1.1), false), PhaseRegion::Superradiant);
        let lp = lambda_plus(0.16, -0.4).unwrap();
        let d = DimensionlessParams::new(lp * (1.0 + 1e-12), 0.16, 0.1).with_kappa(-0.4);
        assert_eq!(phase_region(&d, true), PhaseRegion::Critical);
        assert_eq!(phase_region(&d, false), PhaseRegion::Normal);
    }

    #[test]
    fn chi_opt_minimizes_force_bound() {
        // closed-form δF² ∝ S + λ²Q at the working coupling; compare with a 10⁴-point scan
        for &(lambda, gamma) in &[(0.9, 0.2857), (0.5, 0.16), (1.0, 0.5)] {
            let d = DimensionlessParams::new(lambda, gamma, 0.4);
            let l2 = lambda * lambda;
            let q = |chi: f64| (l2 - 2.0) * (2.0 * chi).cos() + 2.0 * gamma * (2.0 * chi).sin();
            let best = force_optimal_phase(&d, false);
            assert!(((2.0 * best).tan() - 2.0 * gamma / (l2 - 2.0)).abs() < 1e-12);
            let scan_min = (0..10_000)
                .map(|i| q(PI * i as f64 / 10_000.0))
                .fold(f64::INFINITY, f64::min);
            assert!(q(best) <= scan_min + 1e-12);
            assert!(q(best) < q(best + PI / 2.0));

            let cs = critical_structure(&d);
            let a = cs.lambda_c * cs.lambda_c - 2.0;
            assert!(((2.0 * cs.chi_opt).tan() - 2.0 * gamma / a).abs() < 1e-12);
            let qs = a * (2.0 * cs.chi_opt).cos() + 2.0 * gamma * (2.0 * cs.chi_opt).sin();
            assert!((qs + (a * a + 4.0 * gamma * gamma).sqrt()).abs() < 1e-12);
            assert!(2.0 * cs.chi_opt > -PI && 2.0 * cs.chi_opt <= PI);
        }
    }

    proptest! {
        #[test]
        fn round_trip(lambda in 0.0..3.0f64, gamma in 0.0..2.0f64, force in 0.0..5.0f64,
                      kappa in -0.9..0.9f64, eta in 1e-4..1.0f64, omega in 0.1..10.0f64) {
            let d = DimensionlessParams { lambda, gamma_t: gamma, force_t: force, kappa_t: kappa, eta };
            let p = ModelParams::from_dimensionless(&d, 0.3, 2, omega).unwrap();
            let b = derive_dimensionless(&p).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * a.abs().max(b.abs()) * 4.0;
            prop_assert!(close(b.lambda, lambda));
            prop_assert!(close(b.gamma_t, gamma));
            prop_assert!(close(b.force_t, force));
            prop_assert!(close(b.kappa_t, kappa));
            prop_assert!(close(b.eta, eta));
        }

        #[test]
        fn lambda_c_at_least_one(gamma in 0.0..10.0f64) {
            let cs = critical_structure(&DimensionlessParams::new(0.1, gamma, 0.1));
            prop_assert!(cs.lambda_c >= 1.0);
            prop_assert_eq!(cs.lambda_c == 1.0, gamma == 0.0);
        }

        #[test]
        fn hopping_lowers_critical_coupling(gamma in 0.0..0.95f64, frac in 0.001..0.999f64) {
            let kmin = -1.0 + gamma * gamma;
            let kappa = kmin * frac;
            let lc = (1.0 + gamma * gamma).sqrt();
            prop_assert!(lambda_plus(gamma, kappa).unwrap() < lc);
        }

        #[test]
        fn kappa_factorization(lambda in 0.0..2.0f64, gamma in 0.0..1.0f64, kappa in -0.95..0.95f64) {
            let d = DimensionlessParams::new(lambda, gamma, 0.1).with_kappa(kappa);
            let cs = critical_structure(&d);
            prop_assert_eq!(cs.kappa_plus.is_some(), lambda.powi(4) >= 4.0 * gamma * gamma);
            if let (Some(kp), Some(km), Some(lp)) = (cs.kappa_plus, cs.kappa_minus, cs.lambda_plus) {
                let lhs = (1.0 + kappa) * (lp * lp - lambda * lambda);
                let rhs = (kp - kappa) * (km - kappa);
                prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }
}
