//! Closed-form Gaussian steady states of the effective quadratic model.

mod single;
mod two_site;

pub use single::{covariance_single, decompose_single, decomposition_derivatives, mean_single, DecompositionDerivatives, SqueezedThermal};
pub use two_site::{covariance_two_site, mean_two_site, two_site_state};

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// n-mode Gaussian state; quadratures ordered x₁, p₁, …, x_N, p_N with vacuum covariance = identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub n_modes: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        assert_eq!(mean.len() % 2, 0);
        assert_eq!(cov.shape(), (mean.len(), mean.len()));
        Self { n_modes: mean.len() / 2, mean, cov }
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self::new(DVector::zeros(2 * n_modes), DMatrix::identity(2 * n_modes, 2 * n_modes))
    }

    /// Block-diagonal Ω with [[0, 1], [-1, 0]] per mode, so that [R_k, R_l] = 2iΩ_kl.
    pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
        let mut om = DMatrix::zeros(2 * n_modes, 2 * n_modes);
        for k in 0..n_modes {
            om[(2 * k, 2 * k + 1)] = 1.0;
            om[(2 * k + 1, 2 * k)] = -1.0;
        }
        om
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.cov - self.cov.transpose()).amax()
    }

    /// Smallest eigenvalue of V + iΩ; non-negative for a physical state.
    pub fn uncertainty_margin(&self) -> f64 {
        let om = Self::symplectic_form(self.n_modes);
        let h = DMatrix::from_fn(self.cov.nrows(), self.cov.ncols(), |i, j| {
            C64::new(0.5 * (self.cov[(i, j)] + self.cov[(j, i)]), om[(i, j)])
        });
        h.symmetric_eigenvalues().min()
    }

    /// Marginal state of one mode.
    pub fn mode(&self, k: usize) -> GaussianState {
        let i = 2 * k;
        GaussianState::new(
            self.mean.rows(i, 2).into_owned(),
            self.cov.view((i, i), (2, 2)).into_owned(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_minimal() {
        let v = GaussianState::vacuum(2);
        assert!(v.uncertainty_margin().abs() < 1e-14);
        let mut squeezed = GaussianState::vacuum(1);
        squeezed.cov[(0, 0)] = 0.5;
        assert!(squeezed.uncertainty_margin() < -0.1);
    }
}
