use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpsense::analytic::{covariance_single, decompose_single};
use dpsense::dynamics::{
    expectations, numeric_qfim_exact, solve_converged, write_density, write_moments, HarnessOptions, MemoryBudget,
    Model, NumericQfimOptions, SteadyMethod, SteadyOptions,
};
use dpsense::exec::{with_threads, Execution};
use dpsense::metrology::{crb_report, qfim_gaussian_numeric, qfim_single_closed, qfim_two_site_closed, FiniteDifference};
use dpsense::params::{DimensionlessParams, ModelParams};
use dpsense::validation::run_all;
use dpsense_cli::figures::{figure, FigureOptions};
use dpsense_cli::table::{sha256_hex, Cell, Table};
use dpsense_cli::{exit, parse_sweep, run_sweep, CliError};

#[derive(Parser)]
#[command(name = "dpsense", version, about = "Force and phase sensing with a driven dissipative Rabi lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form steady state (α, δ, r, φ, N_th, means, covariance) of one site
    Decompose(PointArgs),
    /// QFIM, its inverse, the commutator coefficient and Cramér-Rao bounds
    Qfim {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = QfimTier::Closed)]
        tier: QfimTier,
        /// Number of repetitions ν
        #[arg(long, default_value_t = 1)]
        nu: u32,
        /// Fock cutoff per mode (master-equation tiers)
        #[arg(long, default_value_t = 60)]
        cutoff: usize,
    },
    /// Master-equation steady state in a truncated Fock space
    Steady {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = ModelArg::FullRabi)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Fock cutoff per mode; raised automatically until the tail guard passes
        #[arg(long, default_value_t = 40)]
        cutoff: usize,
        #[arg(long, default_value_t = 1e-8)]
        tail_guard: f64,
        /// Re-solve at doubled cutoffs and report the moment change
        #[arg(long)]
        check_convergence: bool,
        /// Raise the superoperator size limit (unknowns d²)
        #[arg(long)]
        max_superop_dim: Option<usize>,
        /// Write ρ as binary: header, then row-major little-endian (re, im) f64 pairs
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Write the means and covariance as binary
        #[arg(long)]
        dump_moments: Option<PathBuf>,
    },
    /// Parameter sweep described by a config file
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV (overrides [output] path; stdout when neither is set)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides [solver] threads; 0 = available parallelism)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the data and gnuplot script of figure 1, 2, 3 or 4
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        n: u8,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// ω/Ω of FullRabi points (default 5e-4 for figure 1, 4e-3 for figure 3)
        #[arg(long)]
        eta: Option<f64>,
        /// Fock cutoff per mode of FullRabi points (default 40 for figure 1, 4 for figure 3)
        #[arg(long)]
        cutoff: Option<usize>,
        /// FullRabi points per curve (default 24 for figure 1, 0 for figure 3)
        #[arg(long)]
        rabi_points: Option<usize>,
        /// Fock tail guard of two-site FullRabi points (default 1e-3)
        #[arg(long)]
        tail_guard: Option<f64>,
    },
    /// Run the consistency suite; exit 4 when any criterion fails
    Validate {
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Evaluate draws sequentially
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args, Clone)]
struct PointArgs {
    /// Reduced coupling λ = 2g/√(ωΩ)
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Reduced decay γ/ω
    #[arg(long, conflicts_with = "lambda_c")]
    gamma: Option<f64>,
    /// Critical coupling √(1 + γ̃²), as an alternative to --gamma
    #[arg(long)]
    lambda_c: Option<f64>,
    /// Reduced force F/ω
    #[arg(long)]
    force: f64,
    /// Displacement phase χ
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    chi: f64,
    /// Reduced hopping κ/ω (two sites)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    kappa: f64,
    /// ω/Ω
    #[arg(long, default_value_t = 4e-3)]
    eta: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    sites: u8,
}

impl PointArgs {
    fn params(&self) -> Result<DimensionlessParams, CliError> {
        let gamma = match (self.gamma, self.lambda_c) {
            (Some(g), _) => g,
            (None, Some(lc)) if lc >= 1.0 => (lc * lc - 1.0).sqrt(),
            (None, Some(_)) => return Err(CliError::Config("--lambda-c must be at least 1".into())),
            (None, None) => return Err(CliError::Config("one of --gamma or --lambda-c is required".into())),
        };
        let d = DimensionlessParams::new(self.lambda, gamma, self.force).with_kappa(self.kappa).with_eta(self.eta);
        d.validate()?;
        if self.sites == 1 && self.kappa != 0.0 {
            return Err(CliError::Config("--kappa needs --sites 2".into()));
        }
        Ok(d)
    }

    fn model(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::from_dimensionless(&self.params()?, self.chi, self.sites as usize, 1.0)?)
    }

    fn hash(&self, extra: &str) -> String {
        sha256_hex(
            format!(
                "lambda={:?};gamma={:?};lambda_c={:?};force={:?};chi={:?};kappa={:?};eta={:?};sites={};{extra}",
                self.lambda, self.gamma, self.lambda_c, self.force, self.chi, self.kappa, self.eta, self.sites
            )
            .as_bytes(),
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QfimTier {
    /// Closed forms
    Closed,
    /// Finite differences of the Lyapunov Gaussian state
    Lyapunov,
    /// Spectral SLDs of the effective-model master-equation steady state
    Exact,
    /// Spectral SLDs of the full Rabi steady state (spin-reduced)
    FullRabi,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    FullRabi,
    Effective,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    NullSpace,
    TimeEvolve,
    Metastable,
}

fn stdout_table(t: &Table) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    t.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn decompose(point: &PointArgs) -> Result<(), CliError> {
    if point.sites != 1 {
        return Err(CliError::Config("decompose is single-site".into()));
    }
    let d = point.params()?;
    let s = decompose_single(&d, point.chi)?;
    let g = covariance_single(&s);
    let mut t = Table::new(&point.hash("decompose"), "closed_form", names(&["alpha", "delta", "r", "phi", "n_th", "x_mean", "p_mean", "v_xx", "v_xp", "v_pp"]));
    t.rows.push(
        [s.alpha, s.delta, s.r, s.phi, s.n_th, g.mean[0], g.mean[1], g.cov[(0, 0)], g.cov[(0, 1)], g.cov[(1, 1)]]
            .map(Cell::Num)
            .to_vec(),
    );
    stdout_table(&t)
}

fn qfim(point: &PointArgs, tier: QfimTier, nu: u32, cutoff: usize) -> Result<(), CliError> {
    let d = point.params()?;
    let two = point.sites == 2;
    let chi = point.chi;
    let (q, tier_name) = match tier {
        QfimTier::Closed if two => (qfim_two_site_closed(&d, chi)?, "closed_form"),
        QfimTier::Closed => (qfim_single_closed(&d, chi)?, "closed_form"),
        QfimTier::Lyapunov => {
            let state = |f: f64, c: f64| dpsense::dynamics::steady_moments(&dpsense::dynamics::moment_flow(&d.with_force(f), c, point.sites as usize));
            (qfim_gaussian_numeric(state, (d.force_t, chi), &FiniteDifference::default())?, "lyapunov")
        }
        QfimTier::Exact | QfimTier::FullRabi => {
            let model = if matches!(tier, QfimTier::Exact) { Model::EffectiveQuadratic } else { Model::FullRabi };
            let opts = NumericQfimOptions { model, ..Default::default() };
            let cut = vec![cutoff; point.sites as usize];
            let name = if model == Model::FullRabi { "full_rabi" } else { "effective_master_equation" };
            (numeric_qfim_exact(&point.model()?, &cut, &opts)?, name)
        }
    };
    let r = crb_report(&q, nu, two)?;
    let mut t = Table::new(
        &point.hash(&format!("qfim;tier={tier_name};nu={nu};cutoff={cutoff}")),
        tier_name,
        names(&["F_FF", "F_Fchi", "F_chichi", "Finv_FF", "Finv_Fchi", "Finv_chichi", "comm_c", "dF", "dchi", "sum_qp", "sql_bound", "beats_sql"]),
    )
    .with_meta("nu", nu);
    let mut row: Vec<Cell> = [q.fim[(0, 0)], q.fim[(0, 1)], q.fim[(1, 1)], q.fim_inv[(0, 0)], q.fim_inv[(0, 1)], q.fim_inv[(1, 1)], q.commutator_coeff]
        .map(Cell::Num)
        .to_vec();
    row.extend([Cell::from(r.d_force), Cell::from(r.d_chi), Cell::Num(r.dq2_plus_dp2), Cell::Num(r.sql_bound), Cell::Int(r.beats_sql as i64)]);
    t.rows.push(row);
    stdout_table(&t)
}

#[allow(clippy::too_many_arguments)]
fn steady(
    point: &PointArgs,
    model: ModelArg,
    method: MethodArg,
    cutoff: usize,
    tail_guard: f64,
    check: bool,
    max_superop_dim: Option<usize>,
    dump: Option<&PathBuf>,
    dump_moments: Option<&PathBuf>,
) -> Result<(), CliError> {
    let p = point.model()?;
    let model = match model {
        ModelArg::FullRabi => Model::FullRabi,
        ModelArg::Effective => Model::EffectiveQuadratic,
    };
    let method = match method {
        MethodArg::Auto => SteadyMethod::Auto,
        MethodArg::NullSpace => SteadyMethod::NullSpace,
        MethodArg::TimeEvolve => SteadyMethod::TimeEvolve,
        MethodArg::Metastable => SteadyMethod::Metastable,
    };
    let mut budget = MemoryBudget::default();
    if let Some(m) = max_superop_dim {
        budget.max_superop_dim = m;
    }
    let opts = HarnessOptions {
        method,
        steady: SteadyOptions::default(),
        budget,
        tail_guard,
        convergence_tol: check.then_some(1e-8),
        ..Default::default()
    };
    let cut = vec![cutoff; point.sites as usize];
    let rep = solve_converged(&p, &cut, model, &opts)?;
    if let Some(path) = dump {
        write_density(path, &rep.rho)?;
    }
    if let Some(path) = dump_moments {
        write_moments(path, &expectations(&rep.rho.trace_spins())?)?;
    }
    let n = rep.moments.means.len();
    let q = ["x", "p", "x2", "p2"];
    let mut headers: Vec<String> = q[..n].iter().map(|s| format!("{s}_mean")).collect();
    for i in 0..n {
        for j in i..n {
            headers.push(format!("v_{}{}", q[i], q[j]));
        }
    }
    headers.extend(names(&["tail_mass", "cutoff", "cutoff_change"]));
    let tier = if model == Model::FullRabi { "full_rabi" } else { "effective_master_equation" };
    let hash = point.hash(&format!("steady;model={tier};method={method:?};cutoff={cutoff};tail_guard={tail_guard:?};check={check}"));
    let mut t = Table::new(&hash, tier, headers);
    let mut row: Vec<Cell> = rep.moments.means.iter().map(|&x| Cell::Num(x)).collect();
    for i in 0..n {
        for j in i..n {
            row.push(Cell::Num(rep.moments.cov[(i, j)]));
        }
    }
    row.extend([Cell::Num(rep.tail_mass), Cell::Int(rep.cutoffs[0] as i64), Cell::from(rep.cutoff_change)]);
    t.rows.push(row);
    stdout_table(&t)
}

fn sweep(config: &PathBuf, out: Option<&PathBuf>, threads: Option<usize>) -> Result<(), CliError> {
    let bytes = std::fs::read(config).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config(format!("{}: not UTF-8", config.display())))?;
    let (mut spec, path) = parse_sweep(&text)?;
    if let Some(t) = threads {
        spec.solver.threads = t;
    }
    let table = run_sweep(&spec, &sha256_hex(&bytes))?;
    match out.or(path.as_ref()) {
        Some(p) => table.save(p)?,
        None => stdout_table(&table)?,
    }
    Ok(())
}

fn validate(threads: usize, sequential: bool) -> Result<(), CliError> {
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let outcomes = with_threads(threads, || run_all(exec));
    let mut failed = Vec::new();
    for o in &outcomes {
        println!("{o}");
        if !o.passed {
            failed.push(o.id.to_string());
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", outcomes.len());
        Ok(())
    } else {
        Err(CliError::Validation(format!("criteria {} failed", failed.join(", "))))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose(point) => decompose(&point),
        Command::Qfim { point, tier, nu, cutoff } => qfim(&point, tier, nu, cutoff),
        Command::Steady { point, model, method, cutoff, tail_guard, check_convergence, max_superop_dim, dump, dump_moments } => {
            steady(&point, model, method, cutoff, tail_guard, check_convergence, max_superop_dim, dump.as_ref(), dump_moments.as_ref())
        }
        Command::Sweep { config, out, threads } => sweep(&config, out.as_ref(), threads),
        Command::Figure { n, out_dir, threads, eta, cutoff, rabi_points, tail_guard } => {
            let opts = FigureOptions { out_dir, threads, eta, cutoff, rabi_points, tail_guard };
            let report = figure(n, &opts)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Validate { threads, sequential } => validate(threads, sequential),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
