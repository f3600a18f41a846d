use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

use super::space::{FactorKind, HilbertSpace, LocalOp, SparseOp};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// ω a†a + (Ω/2)σz + g(a + a†)σx per site, plus drive and hopping.
    FullRabi,
    /// ω(1 - λ²/2)a†a - (ωλ²/4)(a†² + a²) per site, plus drive and hopping.
    EffectiveQuadratic,
}

/// Upper limit on the number of superoperator unknowns d².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryBudget {
    pub max_superop_dim: usize,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self { max_superop_dim: 400_000 }
    }
}

/// L(ρ) = -i[H, ρ] + Σ_k γ_k (2 a_k ρ a_k† - {a_k† a_k, ρ}) = Kρ + ρK† + Σ_k 2γ_k a_k ρ a_k†
/// with K = -iH - Σ_k γ_k a_k† a_k.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub space: HilbertSpace,
    pub model: Model,
    pub params: ModelParams,
    pub hamiltonian: SparseOp,
    k: SparseOp,
    jumps: Vec<(f64, SparseOp)>,
    /// d², the number of superoperator unknowns.
    pub dim: usize,
}

pub(crate) fn boson_ops(space: &HilbertSpace) -> Vec<SparseOp> {
    space
        .boson_factors()
        .into_iter()
        .map(|f| SparseOp::embed(space, &[(f, &LocalOp::annihilation(space.factors[f].dim))], C64::new(1.0, 0.0)))
        .collect()
}

pub fn build_liouvillian(p: &ModelParams, cutoffs: &[usize], model: Model, budget: MemoryBudget) -> Result<Liouvillian> {
    p.validate()?;
    if cutoffs.len() != p.n_sites {
        return Err(Error::InvalidParameter(format!("{} cutoffs for {} sites", cutoffs.len(), p.n_sites)));
    }
    if cutoffs.iter().any(|&c| c < 4) {
        return Err(Error::InvalidParameter("Fock cutoffs must be at least 4".into()));
    }
    let space = HilbertSpace::lattice(cutoffs, model == Model::FullRabi);
    let needed = space.dim * space.dim;
    if needed > budget.max_superop_dim {
        return Err(Error::BudgetExceeded { needed, budget: budget.max_superop_dim });
    }

    let re = |x: f64| C64::new(x, 0.0);
    let bosons = space.boson_factors();
    let spins = space.spin_factors();
    let lambda = 2.0 * p.g / (p.omega * p.omega_spin).sqrt();
    let mut terms: Vec<SparseOp> = Vec::new();
    for (site, &bf) in bosons.iter().enumerate() {
        let dim = space.factors[bf].dim;
        let a = LocalOp::annihilation(dim);
        let ad = LocalOp::creation(dim);
        let n = LocalOp::number(dim);
        match model {
            Model::FullRabi => {
                let sf = spins[site];
                terms.push(SparseOp::embed(&space, &[(bf, &n)], re(p.omega)));
                terms.push(SparseOp::embed(&space, &[(sf, &LocalOp::sigma_z())], re(0.5 * p.omega_spin)));
                let sx = LocalOp::sigma_x();
                terms.push(SparseOp::embed(&space, &[(sf, &sx), (bf, &a)], re(p.g)));
                terms.push(SparseOp::embed(&space, &[(sf, &sx), (bf, &ad)], re(p.g)));
            }
            Model::EffectiveQuadratic => {
                terms.push(SparseOp::embed(&space, &[(bf, &n)], re(p.omega * (1.0 - 0.5 * lambda * lambda))));
                let sq = re(-0.25 * p.omega * lambda * lambda);
                terms.push(SparseOp::embed(&space, &[(bf, &a), (bf, &a)], sq));
                terms.push(SparseOp::embed(&space, &[(bf, &ad), (bf, &ad)], sq));
            }
        }
        let drive = C64::from_polar(0.5 * p.force, p.chi);
        terms.push(SparseOp::embed(&space, &[(bf, &ad)], drive));
        terms.push(SparseOp::embed(&space, &[(bf, &a)], drive.conj()));
        if site + 1 < bosons.len() && p.kappa != 0.0 {
            let bf2 = bosons[site + 1];
            let dim2 = space.factors[bf2].dim;
            let a2 = LocalOp::annihilation(dim2);
            let ad2 = LocalOp::creation(dim2);
            terms.push(SparseOp::embed(&space, &[(bf2, &a2), (bf, &ad)], re(p.kappa)));
            terms.push(SparseOp::embed(&space, &[(bf, &a), (bf2, &ad2)], re(p.kappa)));
        }
    }
    let mut h = SparseOp::zero(space.dim);
    for t in &terms {
        h = h.add(t);
    }
    let mut k = h.scale(C64::new(0.0, -1.0));
    let mut jumps = Vec::new();
    for (site, a) in boson_ops(&space).into_iter().enumerate() {
        let g = p.gamma[site];
        if g > 0.0 {
            k = k.add(&a.adjoint().matmul(&a).scale(re(-g)));
            jumps.push((g, a));
        }
    }
    let l = Liouvillian { dim: needed, space, model, params: p.clone(), hamiltonian: h, k, jumps };
    l.check_preservation()?;
    Ok(l)
}

impl Liouvillian {
    pub fn hilbert_dim(&self) -> usize {
        self.space.dim
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = self.k.mul_dense(rho);
        out += self.k.mul_dense(&rho.adjoint()).adjoint();
        for (g, a) in &self.jumps {
            let ar = a.mul_dense(rho);
            out += a.mul_dense(&ar.adjoint()).adjoint() * C64::new(2.0 * g, 0.0);
        }
        out
    }

    /// Column-stacking superoperator triplets, vec index i + d·j for ρ_ij.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let d = self.space.dim;
        let kt = self.k.triplets();
        let mut t = Vec::with_capacity(2 * d * kt.len());
        for &(i, k, v) in &kt {
            for j in 0..d {
                t.push((i + d * j, k + d * j, v));
            }
        }
        // ρK†: conj(K) ⊗ I
        for &(j, l, v) in &kt {
            for i in 0..d {
                t.push((i + d * j, i + d * l, v.conj()));
            }
        }
        for (g, a) in &self.jumps {
            let at = a.triplets();
            for &(i, k, va) in &at {
                for &(j, l, vb) in &at {
                    t.push((i + d * j, k + d * l, va * vb.conj() * (2.0 * g)));
                }
            }
        }
        t
    }

    pub fn superoperator(&self) -> Result<SparseColMat<usize, C64>> {
        to_faer(self.dim, self.triplets())
    }

    /// |↓⟩ ⊗ |0⟩ per site (vacuum for the effective model).
    pub fn initial_state(&self) -> DMatrix<C64> {
        let levels: Vec<usize> = self
            .space
            .factors
            .iter()
            .map(|f| if f.kind == FactorKind::Spin { 1 } else { 0 })
            .collect();
        let idx = self.space.index_of(&levels);
        let mut rho = DMatrix::zeros(self.space.dim, self.space.dim);
        rho[(idx, idx)] = C64::new(1.0, 0.0);
        rho
    }

    fn check_preservation(&self) -> Result<()> {
        let d = self.space.dim;
        let x = DMatrix::from_fn(d, d, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            let re = (1.3 * a + 0.7 * b).sin() / (1.0 + a + b);
            let im = if i == j { 0.0 } else { (0.9 * a - 0.4 * b).cos() / (1.0 + a + b) };
            C64::new(re, if i < j { im } else { -im })
        });
        let lx = self.apply(&x);
        let scale = lx.camax().max(1.0);
        let herm = (&lx - lx.adjoint()).camax();
        let tr = lx.trace().norm();
        if herm > 1e-10 * scale || tr > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "Liouvillian breaks Hermiticity ({herm:e}) or trace ({tr:e})"
            )));
        }
        Ok(())
    }
}

pub(crate) fn to_faer(n: usize, mut t: Vec<(usize, usize, C64)>) -> Result<SparseColMat<usize, C64>> {
    t.sort_unstable_by_key(|e| (e.1, e.0));
    let mut merged: Vec<Triplet<usize, usize, C64>> = Vec::with_capacity(t.len());
    for (i, j, v) in t {
        match merged.last_mut() {
            Some(last) if last.row == i && last.col == j => last.val += v,
            _ => merged.push(Triplet::new(i, j, v)),
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &merged).map_err(|_| Error::Singular("sparse assembly"))
}
