//! Truncated Fock-space building blocks.

use nalgebra::DMatrix;

use crate::C64;

/// Annihilation operator on levels 0..dim.
pub fn annihilation(dim: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Thermal populations N^n / (N+1)^(n+1) on levels 0..dim.
pub fn thermal_populations(n_th: f64, dim: usize) -> Vec<f64> {
    if n_th <= 0.0 {
        let mut p = vec![0.0; dim];
        p[0] = 1.0;
        return p;
    }
    let q = n_th / (n_th + 1.0);
    let mut p = Vec::with_capacity(dim);
    let mut cur = 1.0 / (n_th + 1.0);
    for _ in 0..dim {
        p.push(cur);
        cur *= q;
    }
    p
}

/// exp(-i G) for Hermitian G.
pub fn unitary_from_generator(g: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = g.clone().symmetric_eigen();
    let phases = eig.eigenvalues.map(|e| C64::new(0.0, -e).exp());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, ph) in phases.iter().enumerate() {
        for x in scaled.column_mut(j).iter_mut() {
            *x *= *ph;
        }
    }
    scaled * v.adjoint()
}

/// Coherent-state projector |β⟩⟨β| on levels 0..dim.
pub fn coherent_projector(beta: C64, dim: usize) -> DMatrix<C64> {
    let mut amp = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c *= beta / (n as f64).sqrt();
        }
        amp.push(c);
    }
    DMatrix::from_fn(dim, dim, |i, j| amp[i] * amp[j].conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutator_is_identity_below_edge() {
        let a = annihilation(10);
        let c = &a * a.adjoint() - a.adjoint() * &a;
        for i in 0..9 {
            assert!((c[(i, i)].re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn thermal_normalized() {
        let p = thermal_populations(1.5, 200);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean: f64 = p.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
        assert!((mean - 1.5).abs() < 1e-10);
    }

    #[test]
    fn displacement_generator() {
        let dim = 60;
        let a = annihilation(dim);
        let alpha = 1.3;
        let k = (a.adjoint() - &a) * C64::new(0.0, alpha);
        let d = unitary_from_generator(&k);
        let col0 = d.column(0);
        let want = coherent_projector(C64::new(alpha, 0.0), dim);
        for n in 0..20 {
            assert!((col0[n] * col0[0].conj() - want[(n, 0)]).norm() < 1e-12);
        }
    }
}
