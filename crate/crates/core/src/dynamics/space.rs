use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Two-level system; index 0 = up (σz = +1), 1 = down.
    Spin,
    /// Fock levels 0..dim.
    Boson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
}

/// Tensor-product space, site-major with the spin factor before the boson factor.
/// The first factor is the most significant index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    pub factors: Vec<Factor>,
    strides: Vec<usize>,
    pub dim: usize,
}

impl HilbertSpace {
    pub fn new(factors: Vec<Factor>) -> Self {
        let mut strides = vec![1; factors.len()];
        for i in (0..factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * factors[i + 1].dim;
        }
        let dim = factors.iter().map(|f| f.dim).product();
        Self { factors, strides, dim }
    }

    /// One boson per site with `cutoff + 1` levels, preceded by a spin when `with_spin`.
    pub fn lattice(cutoffs: &[usize], with_spin: bool) -> Self {
        let mut factors = Vec::new();
        for &c in cutoffs {
            if with_spin {
                factors.push(Factor { kind: FactorKind::Spin, dim: 2 });
            }
            factors.push(Factor { kind: FactorKind::Boson, dim: c + 1 });
        }
        Self::new(factors)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn boson_factors(&self) -> Vec<usize> {
        (0..self.factors.len()).filter(|&i| self.factors[i].kind == FactorKind::Boson).collect()
    }

    pub fn spin_factors(&self) -> Vec<usize> {
        (0..self.factors.len()).filter(|&i| self.factors[i].kind == FactorKind::Spin).collect()
    }

    pub fn local_index(&self, idx: usize, factor: usize) -> usize {
        (idx / self.strides[factor]) % self.factors[factor].dim
    }

    pub fn stride(&self, factor: usize) -> usize {
        self.strides[factor]
    }

    /// Basis index of a product state given per-factor levels.
    pub fn index_of(&self, levels: &[usize]) -> usize {
        levels.iter().zip(&self.strides).map(|(l, s)| l * s).sum()
    }
}

/// Small operator on one factor, stored column-wise: `cols[j]` lists (row, value).
#[derive(Debug, Clone)]
pub struct LocalOp {
    cols: Vec<Vec<(usize, C64)>>,
}

impl LocalOp {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let cols = (0..m.ncols())
            .map(|j| (0..m.nrows()).filter(|&i| m[(i, j)] != C64::new(0.0, 0.0)).map(|i| (i, m[(i, j)])).collect())
            .collect();
        Self { cols }
    }

    pub fn annihilation(dim: usize) -> Self {
        Self::from_dense(&crate::fock::annihilation(dim))
    }

    pub fn creation(dim: usize) -> Self {
        Self::from_dense(&crate::fock::annihilation(dim).adjoint())
    }

    pub fn number(dim: usize) -> Self {
        Self::from_dense(&DMatrix::from_fn(dim, dim, |i, j| C64::new(if i == j { i as f64 } else { 0.0 }, 0.0)))
    }

    pub fn sigma_x() -> Self {
        Self { cols: vec![vec![(1, C64::new(1.0, 0.0))], vec![(0, C64::new(1.0, 0.0))]] }
    }

    pub fn sigma_z() -> Self {
        Self { cols: vec![vec![(0, C64::new(1.0, 0.0))], vec![(1, C64::new(-1.0, 0.0))]] }
    }
}

/// Compressed sparse row operator on the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<C64>,
}

impl SparseOp {
    pub fn zero(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], col: Vec::new(), val: Vec::new() }
    }

    pub fn from_triplets(dim: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col = Vec::with_capacity(t.len());
        let mut val: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col.push(j);
            val.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self { dim, row_ptr, col, val };
        op.prune();
        op
    }

    fn prune(&mut self) {
        if self.val.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return;
        }
        let t = self.triplets().into_iter().filter(|e| e.2 != C64::new(0.0, 0.0)).collect();
        *self = Self::from_triplets(self.dim, t);
    }

    /// Product of local operators acting on distinct factors, times `coeff`.
    pub fn embed(space: &HilbertSpace, locals: &[(usize, &LocalOp)], coeff: C64) -> Self {
        let mut t = Vec::new();
        for idx in 0..space.dim {
            let mut cur = vec![(idx, coeff)];
            for &(f, op) in locals {
                let stride = space.stride(f);
                let mut next = Vec::with_capacity(cur.len() * 2);
                for (k, c) in cur {
                    let li = space.local_index(k, f);
                    for &(lo, v) in &op.cols[li] {
                        next.push((k - li * stride + lo * stride, c * v));
                    }
                }
                cur = next;
            }
            for (row, v) in cur {
                t.push((row, idx, v));
            }
        }
        Self::from_triplets(space.dim, t)
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((i, self.col[k], self.val[k]));
            }
        }
        t
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::from_triplets(self.dim, t)
    }

    pub fn scale(&self, s: C64) -> SparseOp {
        Self { val: self.val.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn adjoint(&self) -> SparseOp {
        Self::from_triplets(self.dim, self.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect())
    }

    pub fn matmul(&self, other: &SparseOp) -> SparseOp {
        let mut t = Vec::new();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let m = self.col[k];
                for l in other.row_ptr[m]..other.row_ptr[m + 1] {
                    t.push((i, other.col[l], self.val[k] * other.val[l]));
                }
            }
        }
        Self::from_triplets(self.dim, t)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// self · m
    pub fn mul_dense(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for i in 0..self.dim {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.val[k] * src[self.col[k]];
                }
                dst[i] = acc;
            }
        }
        out
    }

    /// m · self
    pub fn dense_mul(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(m.nrows(), self.dim);
        for k in 0..self.dim {
            let src = m.column(k).into_owned();
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let j = self.col[p];
                let v = self.val[p];
                out.column_mut(j).axpy(v, &src, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// tr(self · m)
    pub fn trace_with(&self, m: &DMatrix<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * m[(self.col[k], i)];
            }
        }
        acc
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col[k], self.val[k]))
    }
}

pub(crate) fn check_dims(space: &HilbertSpace, m: &DMatrix<C64>) -> Result<()> {
    if m.shape() != (space.dim, space.dim) {
        return Err(Error::DimensionMismatch(format!("{:?} vs space dim {}", m.shape(), space.dim)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let s = HilbertSpace::lattice(&[3, 2], true);
        assert_eq!(s.dims(), vec![2, 4, 2, 3]);
        assert_eq!(s.dim, 48);
        let idx = s.index_of(&[1, 2, 0, 1]);
        assert_eq!(s.local_index(idx, 0), 1);
        assert_eq!(s.local_index(idx, 1), 2);
        assert_eq!(s.local_index(idx, 3), 1);
        assert_eq!(s.boson_factors(), vec![1, 3]);
    }

    #[test]
    fn embedded_products_match_kron() {
        let s = HilbertSpace::lattice(&[3], true);
        let a = LocalOp::annihilation(4);
        let sx = LocalOp::sigma_x();
        let op = SparseOp::embed(&s, &[(0, &sx), (1, &a)], C64::new(2.0, 0.0));
        let sxd = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(|x| C64::new(x, 0.0));
        let want = sxd.kronecker(&crate::fock::annihilation(4)) * C64::new(2.0, 0.0);
        assert_eq!(op.to_dense(), want);

        let rho = DMatrix::from_fn(8, 8, |i, j| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        assert!((op.mul_dense(&rho) - &want * &rho).camax() < 1e-12);
        assert!((op.dense_mul(&rho) - &rho * &want).camax() < 1e-12);
        assert!((op.trace_with(&rho) - (&want * &rho).trace()).norm() < 1e-12);
        let ad = op.adjoint();
        assert_eq!(ad.to_dense(), want.adjoint());
        assert!((op.matmul(&ad).to_dense() - &want * want.adjoint()).camax() < 1e-12);
    }
}
