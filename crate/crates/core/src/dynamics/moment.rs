use nalgebra::{DMatrix, DVector};

use crate::analytic::GaussianState;
use crate::error::{Error, Result};
use crate::params::{derive_dimensionless, DimensionlessParams, ModelParams};
use crate::C64;

/// d⟨R⟩/dt = M⟨R⟩ + b, dV/dt = MV + VMᵀ + D in units of ω, R = (x₁, p₁, …).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFlow {
    pub drift: DMatrix<f64>,
    pub pump: DVector<f64>,
    pub diffusion: DMatrix<f64>,
}

fn assemble(lambda: f64, gammas: &[f64], force_t: f64, chi: f64, kappa_t: f64) -> MomentFlow {
    let n = gammas.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DVector::zeros(2 * n);
    let mut dd = DMatrix::zeros(2 * n, 2 * n);
    let (s, c) = chi.sin_cos();
    for (k, &g) in gammas.iter().enumerate() {
        let (x, p) = (2 * k, 2 * k + 1);
        m[(x, x)] = -g;
        m[(x, p)] = 1.0;
        m[(p, x)] = -(1.0 - lambda * lambda);
        m[(p, p)] = -g;
        b[x] = force_t * s;
        b[p] = -force_t * c;
        dd[(x, x)] = 2.0 * g;
        dd[(p, p)] = 2.0 * g;
        for l in [k.wrapping_sub(1), k + 1] {
            if l < n {
                m[(x, 2 * l + 1)] = kappa_t;
                m[(p, 2 * l)] = -kappa_t;
            }
        }
    }
    MomentFlow { drift: m, pump: b, diffusion: dd }
}

/// Uniform chain of `n_sites` with nearest-neighbour hopping.
pub fn moment_flow(d: &DimensionlessParams, chi: f64, n_sites: usize) -> MomentFlow {
    assemble(d.lambda, &vec![d.gamma_t; n_sites.max(1)], d.force_t, chi, d.kappa_t)
}

/// Chain from physical parameters; keeps per-site decay rates.
pub fn moment_flow_model(p: &ModelParams) -> Result<MomentFlow> {
    let uniform = ModelParams { gamma: vec![p.gamma[0]; p.n_sites], ..p.clone() };
    let d = derive_dimensionless(&uniform)?;
    let gammas: Vec<f64> = p.gamma.iter().map(|g| g / p.omega).collect();
    Ok(assemble(d.lambda, &gammas, d.force_t, p.chi, d.kappa_t))
}

pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Solve MV + VMᵀ + D = 0 through the complex Schur form of M.
pub fn lyapunov(m: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mc = m.map(|x| C64::new(x, 0.0));
    let (q, t) = mc.schur().unpack();
    let c = q.adjoint() * d.map(|x| C64::new(x, 0.0)) * &q;
    // T Y + Y T^H = -C, columns from the right
    let mut y = DMatrix::<C64>::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs = -c.column(j).into_owned();
        for k in j + 1..n {
            let tjk = t[(j, k)].conj();
            rhs -= y.column(k) * tjk;
        }
        let shift = t[(j, j)].conj();
        let mut col = DVector::<C64>::zeros(n);
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in i + 1..n {
                acc -= t[(i, k)] * col[k];
            }
            let piv = t[(i, i)] + shift;
            if piv.norm() < 1e-300 {
                return Err(Error::Singular("Lyapunov operator"));
            }
            col[i] = acc / piv;
        }
        y.set_column(j, &col);
    }
    let v = (&q * y * q.adjoint()).map(|z| z.re);
    Ok(0.5 * (&v + v.transpose()))
}

pub fn steady_moments(mf: &MomentFlow) -> Result<GaussianState> {
    let top = max_real_eigenvalue(&mf.drift);
    if !(top < 0.0) {
        return Err(Error::NonHurwitz(top));
    }
    let lu = mf.drift.clone().lu();
    let mean = -lu.solve(&mf.pump).ok_or(Error::Singular("drift matrix"))?;
    let cov = lyapunov(&mf.drift, &mf.diffusion)?;
    Ok(GaussianState::new(mean, cov))
}

/// Coupling at which the drift matrix stops being Hurwitz, by bisection in λ.
pub fn hurwitz_critical_coupling(d: &DimensionlessParams, n_sites: usize, tol: f64) -> Result<f64> {
    let unstable = |l: f64| max_real_eigenvalue(&moment_flow(&d.with_lambda(l), 0.0, n_sites).drift) >= 0.0;
    if unstable(0.0) {
        return Err(Error::NonHurwitz(max_real_eigenvalue(&moment_flow(&d.with_lambda(0.0), 0.0, n_sites).drift)));
    }
    let mut hi = 1.0;
    while !unstable(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoConvergence("no instability found".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if unstable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{covariance_single, covariance_two_site, decompose_single, mean_single, mean_two_site};
    use crate::params::lambda_plus;
    use std::f64::consts::PI;

    #[test]
    fn damped_rotation_at_zero_coupling() {
        let mf = moment_flow(&DimensionlessParams::new(0.0, 0.3, 0.2), 0.4, 1);
        assert_eq!(mf.drift, DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, -1.0, -0.3]));
        let st = steady_moments(&mf).unwrap();
        assert!((st.cov - DMatrix::identity(2, 2)).amax() < 1e-13);
        let lc = (1.0f64 + 0.09).sqrt();
        assert!((st.mean.norm() - 0.2 / lc).abs() < 1e-14);
        let s = decompose_single(&DimensionlessParams::new(0.0, 0.3, 0.2), 0.4).unwrap();
        let (x, p) = mean_single(&s);
        assert!((st.mean[0] - x).abs() < 1e-14 && (st.mean[1] - p).abs() < 1e-14);
    }

    #[test]
    fn single_site_matches_closed_form() {
        let d = DimensionlessParams::new(0.9, 0.2857, 0.38);
        let st = steady_moments(&moment_flow(&d, PI / 4.0, 1)).unwrap();
        let cl = covariance_single(&decompose_single(&d, PI / 4.0).unwrap());
        assert!((st.cov - cl.cov).amax() < 1e-10);
        assert!((st.mean - cl.mean).amax() < 1e-10);
    }

    #[test]
    fn two_site_matches_closed_form() {
        let lp = lambda_plus(0.16, -0.47).unwrap();
        let d = DimensionlessParams::new(0.9 * lp, 0.16, 0.13).with_kappa(-0.47);
        let st = steady_moments(&moment_flow(&d, PI / 7.0, 2)).unwrap();
        assert!((&st.mean - mean_two_site(&d, PI / 7.0).unwrap()).amax() < 1e-10);
        assert!((&st.cov - covariance_two_site(&d).unwrap()).amax() < 1e-10);
    }

    #[test]
    fn lyapunov_residual_for_longer_chain() {
        let d = DimensionlessParams::new(0.4, 0.2, 0.3).with_kappa(0.15);
        let mf = moment_flow(&d, 0.2, 6);
        let v = lyapunov(&mf.drift, &mf.diffusion).unwrap();
        let res = &mf.drift * &v + &v * mf.drift.transpose() + &mf.diffusion;
        assert!(res.amax() < 1e-12);
    }

    #[test]
    fn rejects_unstable() {
        let mf = moment_flow(&DimensionlessParams::new(1.2, 0.1, 0.1), 0.0, 1);
        assert!(matches!(steady_moments(&mf), Err(Error::NonHurwitz(_))));
    }

    #[test]
    fn bisection_finds_critical_coupling() {
        for k in [0.0, -0.2, -0.4, -0.47] {
            let d = DimensionlessParams::new(0.0, 0.16, 0.1).with_kappa(k);
            let l = hurwitz_critical_coupling(&d, 2, 1e-12).unwrap();
            assert!((l - lambda_plus(0.16, k).unwrap()).abs() < 1e-8, "kappa {k}");
        }
    }

    #[test]
    fn per_site_decay() {
        let p = ModelParams::new(1.0, 250.0, 3.0, 0.1, 0.3, vec![0.1, 0.3], -0.2).unwrap();
        let mf = moment_flow_model(&p).unwrap();
        assert_eq!(mf.drift[(0, 0)], -0.1);
        assert_eq!(mf.drift[(2, 2)], -0.3);
        assert_eq!(mf.diffusion[(3, 3)], 0.6);
    }
}
