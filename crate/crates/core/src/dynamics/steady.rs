use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use nalgebra::DMatrix;

use super::density::{expectations, DensityMatrix, MomentRecord, DEFAULT_TAIL_GUARD};
use super::liouvillian::{build_liouvillian, to_faer, Liouvillian, MemoryBudget, Model};
use super::moment::{max_real_eigenvalue, moment_flow_model};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    /// Sparse LU of L with one row replaced by the trace functional.
    NullSpace,
    /// Adaptive Dormand-Prince integration from the initial state.
    TimeEvolve,
    /// Long implicit-Euler run from the initial state, with the single slow
    /// spin-mixing mode of the full Rabi Liouvillian projected out.
    Metastable,
    /// Metastable for FullRabi; NullSpace for the effective model up to
    /// `SteadyOptions::nullspace_max_dim` unknowns, TimeEvolve above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Stop criterion ‖L ρ‖_F for TimeEvolve.
    pub tol_ss: f64,
    /// Integration horizon for TimeEvolve, in units of 1/ω.
    pub max_time: f64,
    /// Implicit-Euler step of the Metastable method, in units of 1/ω.
    pub euler_step: f64,
    pub nullspace_max_dim: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tol_ss: 1e-10, max_time: 5e3, euler_step: 0.5, nullspace_max_dim: 250_000 }
    }
}

pub fn steady_state(liou: &Liouvillian, method: SteadyMethod) -> Result<DensityMatrix> {
    steady_state_with(liou, method, &SteadyOptions::default())
}

pub fn resolve_method(liou: &Liouvillian, method: SteadyMethod, opts: &SteadyOptions) -> SteadyMethod {
    match method {
        SteadyMethod::Auto => match liou.model {
            Model::FullRabi => SteadyMethod::Metastable,
            Model::EffectiveQuadratic if liou.dim <= opts.nullspace_max_dim => SteadyMethod::NullSpace,
            Model::EffectiveQuadratic => SteadyMethod::TimeEvolve,
        },
        m => m,
    }
}

pub fn steady_state_with(liou: &Liouvillian, method: SteadyMethod, opts: &SteadyOptions) -> Result<DensityMatrix> {
    let data = match resolve_method(liou, method, opts) {
        SteadyMethod::NullSpace => null_space(liou)?,
        SteadyMethod::TimeEvolve => time_evolve(liou, opts)?,
        SteadyMethod::Metastable => metastable(liou, opts)?,
        SteadyMethod::Auto => unreachable!(),
    };
    DensityMatrix::new(liou.space.clone(), finish(data))
}

fn finish(rho: DMatrix<C64>) -> DMatrix<C64> {
    let h = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = h.trace().re;
    h / C64::new(tr, 0.0)
}

fn to_vec(m: &DMatrix<C64>) -> Mat<C64> {
    let s = m.as_slice();
    Mat::from_fn(s.len(), 1, |i, _| s[i])
}

fn from_vec(v: &Mat<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| v[(i + d * j, 0)])
}

/// Superoperator with the equation of the diagonal element `diag` replaced by tr ρ = 1.
fn solve_constrained(liou: &Liouvillian, diag: usize) -> Result<DMatrix<C64>> {
    let d = liou.hilbert_dim();
    let row = diag + d * diag;
    let mut t: Vec<_> = liou.triplets().into_iter().filter(|e| e.0 != row).collect();
    t.extend((0..d).map(|i| (row, i + d * i, C64::new(1.0, 0.0))));
    let a = to_faer(liou.dim, t)?;
    let lu = a.sp_lu().map_err(|_| Error::NonUniqueSteadyState(0.0))?;
    let mut rhs = Mat::<C64>::zeros(liou.dim, 1);
    rhs[(row, 0)] = C64::new(1.0, 0.0);
    lu.solve_in_place(rhs.as_mut());
    let rho = from_vec(&rhs, d);
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonUniqueSteadyState(f64::INFINITY));
    }
    Ok(rho)
}

/// Two independent constrained solves; a degenerate kernel makes them disagree.
fn null_space(liou: &Liouvillian) -> Result<DMatrix<C64>> {
    let d = liou.hilbert_dim();
    let first = solve_constrained(liou, 0)?;
    let second = solve_constrained(liou, d - 1)?;
    let gap = (&first - &second).camax();
    if gap > 1e-8 {
        return Err(Error::NonUniqueSteadyState(gap));
    }
    let res = liou.apply(&first).camax();
    if res > 1e-8 * liou.apply_scale() {
        return Err(Error::NonUniqueSteadyState(res));
    }
    Ok(first)
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Dormand-Prince integration of ρ from `rho` over [0, t_end]. With `stop_at`
/// set, returns early once ‖L ρ‖_F drops below it.
fn integrate(
    liou: &Liouvillian,
    mut rho: DMatrix<C64>,
    t_end: f64,
    step_tol: f64,
    stop_at: Option<f64>,
) -> (DMatrix<C64>, f64) {
    let mut k1 = liou.apply(&rho);
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    while t < t_end {
        if stop_at.is_some_and(|tol| k1.norm() < tol) {
            break;
        }
        h = h.min(t_end - t);
        let mut k: Vec<DMatrix<C64>> = vec![k1.clone()];
        for s in 1..7 {
            let mut y = rho.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    y += kj * C64::new(h * A[s][j], 0.0);
                }
            }
            k.push(liou.apply(&y));
        }
        let mut err = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
        for s in 0..7 {
            err += &k[s] * C64::new(h * (B5[s] - B4[s]), 0.0);
        }
        let e = err.camax() / step_tol;
        if e <= 1.0 {
            for s in 0..6 {
                if B5[s] != 0.0 {
                    rho += &k[s] * C64::new(h * B5[s], 0.0);
                }
            }
            t += h;
            // FSAL: the last stage was evaluated at the accepted point.
            k1 = k.pop().unwrap();
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).max(1e-12);
    }
    let res = k1.norm();
    (rho, res)
}

fn time_evolve(liou: &Liouvillian, opts: &SteadyOptions) -> Result<DMatrix<C64>> {
    let (rho, res) = integrate(liou, liou.initial_state(), opts.max_time, 1e-3 * opts.tol_ss, Some(opts.tol_ss));
    if res >= opts.tol_ss {
        return Err(Error::NoConvergence(format!("time evolution reached t = {} with |L rho| = {res:e}", opts.max_time)));
    }
    Ok(rho)
}

/// Relaxation rate of the slowest boson mode, from the effective drift matrix.
fn boson_relaxation(p: &ModelParams) -> Result<f64> {
    let top = max_real_eigenvalue(&moment_flow_model(p)?.drift);
    if !(top < 0.0) {
        return Err(Error::NonHurwitz(top));
    }
    Ok(-top * p.omega)
}

/// Implicit-Euler steps after which boson modes have decayed by 1e-12.
fn euler_steps(h: f64, rate: f64) -> usize {
    (1.2 * 1e12f64.ln() / (1.0 + h * rate).ln()).ceil() as usize
}

fn euler_lu(liou: &Liouvillian, h: f64) -> Result<Lu<usize, C64>> {
    let mut t: Vec<_> = liou.triplets().into_iter().map(|(i, j, v)| (i, j, v * -h)).collect();
    t.extend((0..liou.dim).map(|i| (i, i, C64::new(1.0, 0.0))));
    to_faer(liou.dim, t)?.sp_lu().map_err(|_| Error::Singular("implicit Euler step"))
}

fn metastable(liou: &Liouvillian, opts: &SteadyOptions) -> Result<DMatrix<C64>> {
    let h = opts.euler_step / liou.params.omega;
    let steps = euler_steps(h, boson_relaxation(&liou.params)?);
    if liou.space.spin_factors().len() > 1 {
        return metastable_extrapolated(liou, h, steps);
    }
    let d = liou.hilbert_dim();
    let r0 = null_space(liou)?;
    let lu = euler_lu(liou, h)?;
    let mut v = to_vec(&liou.initial_state());
    for _ in 0..steps {
        lu.solve_in_place(v.as_mut());
    }
    let delta = from_vec(&v, d) - &r0;
    let size = delta.norm();
    if size < 1e-10 {
        return Ok(r0);
    }
    let ld = liou.apply(&delta);
    let mu = delta.iter().zip(ld.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() / (size * size);
    let resid = (&ld - &delta * mu).norm() / ld.norm().max(1e-300);
    if resid > 1e-3 {
        return Err(Error::NoConvergence(format!(
            "slow mode not isolated after {steps} implicit steps (eigen-residual {resid:e})"
        )));
    }
    let undo = (C64::new(1.0, 0.0) - mu * h).powi(steps as i32);
    Ok(r0 + delta * undo)
}

/// Several spins give several slow spin-flip modes, so no single mode can be
/// projected out. After n, 2n and 3n implicit steps only slow modes remain;
/// quadratic extrapolation back to step 0 removes their drift.
fn metastable_extrapolated(liou: &Liouvillian, h: f64, steps: usize) -> Result<DMatrix<C64>> {
    let d = liou.hilbert_dim();
    let lu = euler_lu(liou, h)?;
    let mut v = to_vec(&liou.initial_state());
    let mut snaps = Vec::with_capacity(3);
    for _ in 0..3 {
        for _ in 0..steps {
            lu.solve_in_place(v.as_mut());
        }
        snaps.push(from_vec(&v, d));
    }
    let drift = (&snaps[1] - &snaps[0]).camax();
    if drift > 0.1 {
        return Err(Error::NoConvergence(format!("spin populations drift by {drift:e} over the relaxation time")));
    }
    Ok((&snaps[0] - &snaps[1]) * C64::new(3.0, 0.0) + &snaps[2])
}

impl Liouvillian {
    /// Magnitude used to judge residuals of L ρ.
    pub(crate) fn apply_scale(&self) -> f64 {
        let d = self.hilbert_dim();
        let probe = DMatrix::from_fn(d, d, |i, j| C64::new(if i == j { 1.0 / d as f64 } else { 0.0 }, 0.0));
        self.apply(&probe).camax().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub method: SteadyMethod,
    pub steady: SteadyOptions,
    pub budget: MemoryBudget,
    pub tail_guard: f64,
    pub max_doublings: usize,
    /// Re-solve at doubled cutoffs and require the moments to agree to this level.
    pub convergence_tol: Option<f64>,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            method: SteadyMethod::Auto,
            steady: SteadyOptions::default(),
            budget: MemoryBudget::default(),
            tail_guard: DEFAULT_TAIL_GUARD,
            max_doublings: 3,
            convergence_tol: Some(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub rho: DensityMatrix,
    /// Moments of the spin-reduced state.
    pub moments: MomentRecord,
    pub cutoffs: Vec<usize>,
    pub tail_mass: f64,
    /// Largest moment change under cutoff doubling; None when the doubled
    /// problem did not fit the memory budget.
    pub cutoff_change: Option<f64>,
}

/// Solve with automatic cutoff raising until the tail guard passes, then
/// optionally confirm cutoff convergence.
pub fn solve_converged(p: &ModelParams, cutoffs: &[usize], model: Model, opts: &HarnessOptions) -> Result<SteadyReport> {
    let mut cut = cutoffs.to_vec();
    let mut doublings = 0;
    let (rho, tail) = loop {
        let liou = build_liouvillian(p, &cut, model, opts.budget)?;
        let rho = steady_state_with(&liou, opts.method, &opts.steady)?;
        let tail = rho.fock_tail_mass();
        if tail <= opts.tail_guard {
            break (rho, tail);
        }
        if doublings == opts.max_doublings {
            return Err(Error::TruncationUnsafe(tail));
        }
        doublings += 1;
        cut.iter_mut().for_each(|c| *c *= 2);
    };
    let moments = expectations(&rho.trace_spins())?;
    let cutoff_change = match opts.convergence_tol {
        None => None,
        Some(tol) => {
            let wide: Vec<usize> = cut.iter().map(|c| 2 * c).collect();
            match build_liouvillian(p, &wide, model, opts.budget) {
                Err(Error::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e),
                Ok(liou) => {
                    let other = expectations(&steady_state_with(&liou, opts.method, &opts.steady)?.trace_spins())?;
                    let change = (&other.means - &moments.means).amax().max((&other.cov - &moments.cov).amax());
                    if change > tol {
                        return Err(Error::TruncationUnsafe(change));
                    }
                    Some(change)
                }
            }
        }
    };
    Ok(SteadyReport { rho, moments, cutoffs: cut, tail_mass: tail, cutoff_change })
}
