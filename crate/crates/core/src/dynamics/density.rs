use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::liouvillian::boson_ops;
use super::space::{check_dims, Factor, FactorKind, HilbertSpace, SparseOp};
use crate::analytic::GaussianState;
use crate::error::{Error, Result};
use crate::C64;

/// Default guard on the population of the two highest Fock levels of each mode.
pub const DEFAULT_TAIL_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub space: HilbertSpace,
    pub data: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(space: HilbertSpace, data: DMatrix<C64>) -> Result<Self> {
        check_dims(&space, &data)?;
        Ok(Self { space, data })
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.data - self.data.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    /// Largest population of the two top Fock levels over all modes.
    pub fn fock_tail_mass(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for f in self.space.boson_factors() {
            let top = self.space.factors[f].dim;
            let mass: f64 = (0..self.space.dim)
                .filter(|&i| self.space.local_index(i, f) + 2 >= top)
                .map(|i| self.data[(i, i)].re)
                .sum();
            worst = worst.max(mass);
        }
        worst
    }

    pub fn check(&self, tail_guard: f64) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 || self.hermiticity_error() > 1e-10 {
            return Err(Error::NoConvergence(format!("density matrix not normalized/Hermitian (trace {tr})")));
        }
        let tail = self.fock_tail_mass();
        if tail > tail_guard {
            return Err(Error::TruncationUnsafe(tail));
        }
        Ok(())
    }

    /// Trace out every spin factor.
    pub fn trace_spins(&self) -> DensityMatrix {
        let keep = self.space.boson_factors();
        if keep.len() == self.space.factors.len() {
            return self.clone();
        }
        let reduced = HilbertSpace::new(keep.iter().map(|&f| self.space.factors[f]).collect());
        let levels = |i: usize| -> (usize, usize) {
            let kept: Vec<usize> = keep.iter().map(|&f| self.space.local_index(i, f)).collect();
            let traced: usize = self
                .space
                .spin_factors()
                .iter()
                .fold(0, |acc, &f| acc * 2 + self.space.local_index(i, f));
            (reduced.index_of(&kept), traced)
        };
        let map: Vec<(usize, usize)> = (0..self.space.dim).map(levels).collect();
        let mut out = DMatrix::zeros(reduced.dim, reduced.dim);
        for i in 0..self.space.dim {
            for j in 0..self.space.dim {
                if map[i].1 == map[j].1 {
                    out[(map[i].0, map[j].0)] += self.data[(i, j)];
                }
            }
        }
        DensityMatrix { space: reduced, data: out }
    }

    pub fn expect(&self, op: &SparseOp) -> C64 {
        op.trace_with(&self.data)
    }
}

/// Means, symmetrized second moments ½⟨{R_k, R_l}⟩ and covariance of all boson quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub means: DVector<f64>,
    pub second: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

impl MomentRecord {
    pub fn gaussian(&self) -> GaussianState {
        GaussianState::new(self.means.clone(), self.cov.clone())
    }
}

/// Quadrature operators x_k = a_k + a_k†, p_k = i(a_k† - a_k), ordered x₁, p₁, x₂, p₂, …
pub fn quadratures(space: &HilbertSpace) -> Vec<SparseOp> {
    let mut out = Vec::new();
    for a in boson_ops(space) {
        let ad = a.adjoint();
        out.push(a.add(&ad));
        out.push(ad.add(&a.scale(C64::new(-1.0, 0.0))).scale(C64::i()));
    }
    out
}

pub fn expectations(rho: &DensityMatrix) -> Result<MomentRecord> {
    check_dims(&rho.space, &rho.data)?;
    let r = quadratures(&rho.space);
    let n = r.len();
    let means = DVector::from_fn(n, |k, _| rho.expect(&r[k]).re);
    let rr: Vec<DMatrix<C64>> = r.iter().map(|op| op.mul_dense(&rho.data)).collect();
    let second = DMatrix::from_fn(n, n, |k, l| r[k].trace_with(&rr[l]).re);
    let second = 0.5 * (&second + second.transpose());
    let cov = &second - &means * means.transpose();
    Ok(MomentRecord { means, second, cov })
}

const RHO_MAGIC: &[u8; 8] = b"DPSRHO01";
const MOM_MAGIC: &[u8; 8] = b"DPSMOM01";

/// Flat dump: magic, factor count (u64), per factor kind (u64: 0 spin, 1 boson) and dim (u64),
/// then the matrix row-major as (re, im) f64 pairs; all little-endian.
pub fn write_density(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * rho.space.dim * rho.space.dim);
    buf.extend_from_slice(RHO_MAGIC);
    buf.extend_from_slice(&(rho.space.factors.len() as u64).to_le_bytes());
    for f in &rho.space.factors {
        let kind: u64 = if f.kind == FactorKind::Spin { 0 } else { 1 };
        buf.extend_from_slice(&kind.to_le_bytes());
        buf.extend_from_slice(&(f.dim as u64).to_le_bytes());
    }
    for i in 0..rho.space.dim {
        for j in 0..rho.space.dim {
            let z = rho.data[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take8(&mut self) -> Result<[u8; 8]> {
        let s = self.buf.get(self.pos..self.pos + 8).ok_or_else(|| Error::Io("truncated dump".into()))?;
        self.pos += 8;
        Ok(s.try_into().unwrap())
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take8()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take8()?))
    }
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if &c.take8()? != RHO_MAGIC {
        return Err(Error::Io("not a density-matrix dump".into()));
    }
    let nf = c.u64()? as usize;
    let mut factors = Vec::with_capacity(nf);
    for _ in 0..nf {
        let kind = if c.u64()? == 0 { FactorKind::Spin } else { FactorKind::Boson };
        factors.push(Factor { kind, dim: c.u64()? as usize });
    }
    let space = HilbertSpace::new(factors);
    let mut data = DMatrix::zeros(space.dim, space.dim);
    for i in 0..space.dim {
        for j in 0..space.dim {
            data[(i, j)] = C64::new(c.f64()?, c.f64()?);
        }
    }
    DensityMatrix::new(space, data)
}

/// Flat dump: magic, mode count n (u64), 2n means, (2n)² covariance row-major; f64 little-endian.
pub fn write_moments(path: &Path, m: &MomentRecord) -> Result<()> {
    let n = m.means.len();
    let mut buf = Vec::new();
    buf.extend_from_slice(MOM_MAGIC);
    buf.extend_from_slice(&((n / 2) as u64).to_le_bytes());
    for v in m.means.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..n {
        for j in 0..n {
            buf.extend_from_slice(&m.cov[(i, j)].to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}
