use dpsense::analytic::{decompose_single, mean_single, mean_two_site};
use dpsense::dynamics::{
    moment_flow, numeric_qfim_exact, solve_converged, steady_moments, HarnessOptions, Model, NumericQfimOptions,
    SteadyMethod, SteadyOptions,
};
use dpsense::exec::{map, with_threads, Execution};
use dpsense::metrology::{
    crb_report, qfim_gaussian_numeric, qfim_single_closed, qfim_two_site_closed, FiniteDifference, QfimResult,
};
use dpsense::params::{critical_structure, phase_region, DimensionlessParams, ModelParams, PhaseRegion};
use dpsense::{Error, Result};

use crate::table::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Lambda,
    Chi,
    KappaT,
    GOverOmega,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lambda" => Axis::Lambda,
            "chi" => Axis::Chi,
            "kappa_t" => Axis::KappaT,
            "g_over_omega" => Axis::GOverOmega,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::Chi => "chi",
            Axis::KappaT => "kappa_t",
            Axis::GOverOmega => "g_over_omega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    ClosedForm,
    Lyapunov,
    FullRabi,
}

impl Tier {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "closed_form" => Tier::ClosedForm,
            "lyapunov" => Tier::Lyapunov,
            "full_rabi" => Tier::FullRabi,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::ClosedForm => "closed_form",
            Tier::Lyapunov => "lyapunov",
            Tier::FullRabi => "full_rabi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Means,
    Decomposition,
    Qfim,
    Crb,
    SumQp,
}

impl Output {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "means" => Output::Means,
            "decomposition" => Output::Decomposition,
            "qfim" => Output::Qfim,
            "crb" => Output::Crb,
            "sum_qp" => Output::SumQp,
            _ => return None,
        })
    }

    fn columns(self, sites: usize) -> &'static [&'static str] {
        match (self, sites) {
            (Output::Means, 1) => &["x_mean", "p_mean"],
            (Output::Means, _) => &["x_mean", "p_mean", "x2_mean", "p2_mean"],
            (Output::Decomposition, _) => &["alpha", "delta", "r", "phi", "n_th"],
            (Output::Qfim, _) => &["F_FF", "F_Fchi", "F_chichi", "Finv_FF", "Finv_Fchi", "Finv_chichi", "comm_c"],
            (Output::Crb, _) => &["dF", "dchi"],
            (Output::SumQp, _) => &["sum_qp", "sql_bound"],
        }
    }
}

/// Solver settings of the FullRabi tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub cutoff: usize,
    pub tail_guard: f64,
    pub max_doublings: usize,
    pub convergence_check: bool,
    pub euler_step: f64,
    /// Worker pool size, 0 for available parallelism.
    pub threads: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            cutoff: 40,
            tail_guard: dpsense::dynamics::DEFAULT_TAIL_GUARD,
            max_doublings: 3,
            convergence_check: false,
            euler_step: 0.5,
            threads: 0,
        }
    }
}

impl SolverSettings {
    fn harness(&self) -> HarnessOptions {
        HarnessOptions {
            method: SteadyMethod::Auto,
            steady: SteadyOptions { euler_step: self.euler_step, ..Default::default() },
            tail_guard: self.tail_guard,
            max_doublings: self.max_doublings,
            convergence_tol: self.convergence_check.then_some(1e-8),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: DimensionlessParams,
    pub chi: f64,
    pub sites: usize,
    pub axis: Axis,
    /// Strictly monotone.
    pub grid: Vec<f64>,
    pub outputs: Vec<Output>,
    pub tier: Tier,
    pub nu: u32,
    pub allow_superradiant: bool,
    pub solver: SolverSettings,
}

impl SweepSpec {
    pub fn new(base: DimensionlessParams, chi: f64, sites: usize, axis: Axis, grid: Vec<f64>, tier: Tier) -> Self {
        Self {
            base,
            chi,
            sites,
            axis,
            grid,
            outputs: vec![Output::Means],
            tier,
            nu: 1,
            allow_superradiant: false,
            solver: SolverSettings::default(),
        }
    }

    pub fn with_outputs(mut self, outputs: &[Output]) -> Self {
        self.outputs = outputs.to_vec();
        self
    }

    /// Parameters at one grid value.
    pub fn point(&self, v: f64) -> (DimensionlessParams, f64) {
        let d = self.base;
        match self.axis {
            Axis::Lambda => (d.with_lambda(v), self.chi),
            Axis::Chi => (d, v),
            Axis::KappaT => (d.with_kappa(v), self.chi),
            Axis::GOverOmega => (d.with_lambda(DimensionlessParams::lambda_from_g_over_omega(v, d.eta)), self.chi),
        }
    }

    pub fn headers(&self) -> Vec<String> {
        let mut h = vec![self.axis.name().to_string()];
        for o in &self.outputs {
            h.extend(o.columns(self.sites).iter().map(|s| s.to_string()));
        }
        if self.tier == Tier::FullRabi {
            h.extend(["tail_mass", "cutoff"].map(String::from));
        }
        h
    }
}

/// Observables of one grid point.
struct Point {
    means: Vec<f64>,
    qfim: Option<QfimResult>,
    tail: Option<(f64, usize)>,
}

fn closed(spec: &SweepSpec, d: &DimensionlessParams, chi: f64, need_qfim: bool) -> Result<Point> {
    let means = if spec.sites == 1 {
        let (x, p) = mean_single(&decompose_single(d, chi)?);
        vec![x, p]
    } else {
        mean_two_site(d, chi)?.iter().copied().collect()
    };
    let qfim = match (need_qfim, spec.sites) {
        (false, _) => None,
        (true, 1) => Some(qfim_single_closed(d, chi)?),
        (true, _) => Some(qfim_two_site_closed(d, chi)?),
    };
    Ok(Point { means, qfim, tail: None })
}

fn lyapunov(spec: &SweepSpec, d: &DimensionlessParams, chi: f64, need_qfim: bool) -> Result<Point> {
    let state = |f: f64, c: f64| steady_moments(&moment_flow(&d.with_force(f), c, spec.sites));
    let means = state(d.force_t, chi)?.mean.iter().copied().collect();
    let qfim = if need_qfim {
        Some(qfim_gaussian_numeric(state, (d.force_t, chi), &FiniteDifference::default())?)
    } else {
        None
    };
    Ok(Point { means, qfim, tail: None })
}

/// Every tier reports critical and superradiant points as CriticalDivergence.
fn require_normal(spec: &SweepSpec, d: &DimensionlessParams) -> Result<()> {
    let two = spec.sites == 2;
    if phase_region(d, two) == PhaseRegion::Normal {
        return Ok(());
    }
    let critical = critical_structure(d).critical_coupling(two).unwrap_or(0.0);
    Err(Error::CriticalDivergence { lambda: d.lambda, critical })
}

fn full_rabi(spec: &SweepSpec, d: &DimensionlessParams, chi: f64, need_qfim: bool) -> Result<Point> {
    let p = ModelParams::from_dimensionless(d, chi, spec.sites, 1.0)?;
    let cut = vec![spec.solver.cutoff; spec.sites];
    let rep = solve_converged(&p, &cut, Model::FullRabi, &spec.solver.harness())?;
    let qfim = if need_qfim {
        let opts = NumericQfimOptions {
            model: Model::FullRabi,
            steady: spec.solver.harness().steady,
            tail_guard: spec.solver.tail_guard,
            ..Default::default()
        };
        Some(numeric_qfim_exact(&p, &rep.cutoffs, &opts)?)
    } else {
        None
    };
    Ok(Point { means: rep.moments.means.iter().copied().collect(), qfim, tail: Some((rep.tail_mass, rep.cutoffs[0])) })
}

fn row(spec: &SweepSpec, v: f64, res: &Result<Point>) -> Vec<Cell> {
    let (d, chi) = spec.point(v);
    let mut cells = vec![Cell::Num(v)];
    let pt = res.as_ref().ok();
    for o in &spec.outputs {
        let n = o.columns(spec.sites).len();
        let vals: Vec<Option<f64>> = match (o, pt) {
            (_, None) => vec![None; n],
            (Output::Means, Some(p)) => p.means.iter().map(|&x| Some(x)).collect(),
            (Output::Decomposition, Some(_)) => match decompose_single(&d, chi) {
                Ok(s) => [s.alpha, s.delta, s.r, s.phi, s.n_th].map(Some).to_vec(),
                Err(_) => vec![None; n],
            },
            (Output::Qfim, Some(p)) => match &p.qfim {
                Some(q) => [q.fim[(0, 0)], q.fim[(0, 1)], q.fim[(1, 1)], q.fim_inv[(0, 0)], q.fim_inv[(0, 1)], q.fim_inv[(1, 1)], q.commutator_coeff]
                    .map(Some)
                    .to_vec(),
                None => vec![None; n],
            },
            (Output::Crb | Output::SumQp, Some(p)) => match p.qfim.as_ref().map(|q| crb_report(q, spec.nu, spec.sites == 2)) {
                Some(Ok(r)) if *o == Output::Crb => vec![r.d_force, r.d_chi],
                Some(Ok(r)) => vec![Some(r.dq2_plus_dp2), Some(r.sql_bound)],
                _ => vec![None; n],
            },
        };
        cells.extend(vals.into_iter().map(Cell::from));
    }
    if spec.tier == Tier::FullRabi {
        match pt.and_then(|p| p.tail) {
            Some((t, c)) => cells.extend([Cell::Num(t), Cell::Int(c as i64)]),
            None => cells.extend([Cell::Empty, Cell::Empty]),
        }
    }
    cells
}

/// Evaluate every grid point on a bounded pool and gather rows in grid order.
/// CriticalDivergence points become empty cells with a warning on stderr; any
/// other error aborts the sweep.
pub fn run_sweep(spec: &SweepSpec, config_hash: &str) -> Result<Table> {
    let (table, skipped) = sweep_quiet(spec, config_hash)?;
    for (v, e) in skipped {
        eprintln!("warning: {} = {v}: {e}; row left empty", spec.axis.name());
    }
    Ok(table)
}

/// As [`run_sweep`], returning the CriticalDivergence points instead of printing them.
pub fn sweep_quiet(spec: &SweepSpec, config_hash: &str) -> Result<(Table, Vec<(f64, Error)>)> {
    let need_qfim = spec.outputs.iter().any(|o| matches!(o, Output::Qfim | Output::Crb | Output::SumQp));
    let results = with_threads(spec.solver.threads, || {
        map(Execution::Parallel, &spec.grid, |&v| {
            let (d, chi) = spec.point(v);
            require_normal(spec, &d)?;
            match spec.tier {
                Tier::ClosedForm => closed(spec, &d, chi, need_qfim),
                Tier::Lyapunov => lyapunov(spec, &d, chi, need_qfim),
                Tier::FullRabi => full_rabi(spec, &d, chi, need_qfim),
            }
        })
    });
    let mut table = Table::new(config_hash, spec.tier.name(), spec.headers())
        .with_meta("axis", spec.axis.name())
        .with_meta("sites", spec.sites);
    let mut skipped = Vec::new();
    for (&v, res) in spec.grid.iter().zip(&results) {
        match res {
            Ok(_) => {}
            Err(e @ Error::CriticalDivergence { .. }) => skipped.push((v, e.clone())),
            Err(e) => return Err(e.clone()),
        }
        table.rows.push(row(spec, v, res));
    }
    Ok((table, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> DimensionlessParams {
        DimensionlessParams::new(0.9, (1.04f64 * 1.04 - 1.0).sqrt(), 0.38)
    }

    #[test]
    fn tiers_agree_on_means_and_qfim() {
        let grid: Vec<f64> = (0..8).map(|k| 0.8 * k as f64).collect();
        let outs = [Output::Means, Output::Qfim];
        let a = run_sweep(&SweepSpec::new(base(), 0.0, 1, Axis::Chi, grid.clone(), Tier::ClosedForm).with_outputs(&outs), "h").unwrap();
        let b = run_sweep(&SweepSpec::new(base(), 0.0, 1, Axis::Chi, grid, Tier::Lyapunov).with_outputs(&outs), "h").unwrap();
        for col in ["x_mean", "p_mean", "F_FF", "F_chichi"] {
            let (x, y) = (a.column(col).unwrap(), b.column(col).unwrap());
            for (u, v) in x.iter().zip(&y) {
                let (u, v) = (u.unwrap(), v.unwrap());
                assert!((u - v).abs() <= 1e-6 * v.abs().max(1.0), "{col}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn critical_points_leave_empty_cells() {
        let mut spec = SweepSpec::new(base(), 0.3, 1, Axis::Lambda, vec![0.5, 1.2], Tier::ClosedForm);
        spec.outputs = vec![Output::Means, Output::Crb];
        let t = run_sweep(&spec, "h").unwrap();
        assert_eq!(t.rows[1][1], Cell::Empty);
        assert!(t.rows[0][1].as_f64().is_some());
        assert!(t.render().lines().last().unwrap().ends_with(",,,,"));
    }

    #[test]
    fn two_site_columns() {
        let d = DimensionlessParams::new(0.5, 0.16, 0.13).with_kappa(-0.45);
        let spec = SweepSpec::new(d, 0.4, 2, Axis::KappaT, vec![-0.4, -0.2], Tier::ClosedForm)
            .with_outputs(&[Output::Means, Output::SumQp]);
        let t = run_sweep(&spec, "h").unwrap();
        assert_eq!(t.headers, ["kappa_t", "x_mean", "p_mean", "x2_mean", "p2_mean", "sum_qp", "sql_bound"]);
        assert_eq!(t.column("sql_bound").unwrap()[0], Some(1.0));
    }

    #[test]
    fn order_independent_of_pool() {
        let grid: Vec<f64> = (0..50).map(|k| 0.01 * k as f64).collect();
        let mut spec = SweepSpec::new(base(), 0.7, 1, Axis::Lambda, grid, Tier::Lyapunov).with_outputs(&[Output::Means]);
        spec.solver.threads = 1;
        let one = run_sweep(&spec, "h").unwrap().render();
        spec.solver.threads = 3;
        assert_eq!(one, run_sweep(&spec, "h").unwrap().render());
    }
}
