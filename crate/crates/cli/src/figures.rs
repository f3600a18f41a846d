//! Figure pipelines. Each writes `figN_data_*.csv` and a gnuplot script `figN.gp`
//! into the output directory.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dpsense::params::{critical_structure, lambda_plus, DimensionlessParams};

use crate::sweep::{sweep_quiet, Axis, Output, SolverSettings, SweepSpec, Tier};
use crate::table::{sha256_hex, Cell, Table};
use crate::CliError;

/// Relative band (of the curve amplitude) within which FullRabi points must
/// follow the closed form in figure 1.
pub const FIG1_TOLERANCE: f64 = 0.05;
pub const FIG1_LAMBDAS: [f64; 3] = [0.85, 0.9, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub out_dir: PathBuf,
    pub threads: usize,
    /// ω/Ω of FullRabi points; defaults to 5e-4 (figure 1) and 4e-3 (figure 3).
    pub eta: Option<f64>,
    /// Fock cutoff per mode; defaults to 40 (one site) and 4 (two sites).
    pub cutoff: Option<usize>,
    /// FullRabi points per curve; defaults to 24 for figure 1 and 0 for figure 3.
    pub rabi_points: Option<usize>,
    /// Fock tail guard of two-site FullRabi points (default 1e-3).
    pub tail_guard: Option<f64>,
}

impl FigureOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), threads: 0, eta: None, cutoff: None, rabi_points: None, tail_guard: None }
    }

    fn hash(&self, n: u8) -> String {
        sha256_hex(
            format!(
                "figure={n};eta={:?};cutoff={:?};rabi_points={:?};tail_guard={:?}",
                self.eta, self.cutoff, self.rabi_points, self.tail_guard
            )
            .as_bytes(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureReport {
    pub files: Vec<PathBuf>,
    /// Consistency-gate lines (figure 1).
    pub gate: Vec<GateLine>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateLine {
    pub lambda: f64,
    pub rel_error: f64,
    pub passed: bool,
}

fn linspace(a: f64, b: f64, n: usize, endpoint: bool) -> Vec<f64> {
    let div = if endpoint { n.saturating_sub(1).max(1) } else { n } as f64;
    (0..n).map(|k| a + (b - a) * k as f64 / div).collect()
}

/// Open interval (a, b) with n interior points.
fn interior(a: f64, b: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| a + (b - a) * k as f64 / (n + 1) as f64).collect()
}

fn label(v: f64) -> String {
    format!("{v}")
}

/// Assemble a figure table from one axis and several (name, column) pairs.
fn assemble(hash: &str, tier: &str, axis: &str, grid: &[f64], cols: Vec<(String, Vec<Option<f64>>)>) -> Table {
    let mut headers = vec![axis.to_string()];
    headers.extend(cols.iter().map(|c| c.0.clone()));
    let mut t = Table::new(hash, tier, headers);
    for (k, &v) in grid.iter().enumerate() {
        let mut row = vec![Cell::Num(v)];
        row.extend(cols.iter().map(|c| Cell::from(c.1[k])));
        t.rows.push(row);
    }
    t
}

fn column(t: &Table, name: &str) -> Vec<Option<f64>> {
    t.column(name).expect("column requested from the sweep")
}

fn run(spec: &SweepSpec, hash: &str, family: &str) -> Result<Table, CliError> {
    let (t, skipped) = sweep_quiet(spec, hash)?;
    if !skipped.is_empty() {
        eprintln!("note: {family}: {} of {} points at or beyond the critical coupling left empty", skipped.len(), spec.grid.len());
    }
    Ok(t)
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        let p = self.dir.join(name);
        t.save(&p)?;
        self.files.push(p);
        Ok(())
    }

    fn script(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.dir.join(name);
        let head = "# gnuplot script; run from this directory: gnuplot -p ";
        std::fs::write(&p, format!("{head}{name}\nset datafile separator ','\nset key autotitle columnhead\n{body}"))?;
        self.files.push(p);
        Ok(())
    }
}

fn plot_lines(file: &str, cols: std::ops::RangeInclusive<usize>, style: &str) -> Vec<String> {
    cols.map(|c| format!("'{file}' using 1:{c} with {style}")).collect()
}

pub fn fig1_params() -> DimensionlessParams {
    DimensionlessParams::new(0.0, (1.04f64 * 1.04 - 1.0).sqrt(), 0.38)
}

/// FullRabi ⟨x⟩ at one coupling against the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Curve {
    pub lambda: f64,
    pub chi: Vec<f64>,
    pub x_rabi: Vec<f64>,
    pub x_closed: Vec<f64>,
    /// max over a dense χ grid of |⟨x⟩| from the closed form
    pub amplitude: f64,
    /// max |x_rabi - x_closed| / amplitude
    pub rel_error: f64,
    pub seconds: f64,
}

pub fn fig1_curve(lambda: f64, opts: &FigureOptions) -> Result<Fig1Curve, CliError> {
    let start = Instant::now();
    let base = fig1_params().with_lambda(lambda).with_eta(opts.eta.unwrap_or(5e-4));
    let n = opts.rabi_points.unwrap_or(24);
    let chi = linspace(0.0, 2.0 * PI, n, false);
    let mut spec = SweepSpec::new(base, 0.0, 1, Axis::Chi, chi.clone(), Tier::FullRabi);
    spec.solver = SolverSettings { cutoff: opts.cutoff.unwrap_or(40), threads: opts.threads, ..Default::default() };
    let rabi = run(&spec, "", "fig1 FullRabi")?;
    let closed = |grid: Vec<f64>| run(&SweepSpec { grid, tier: Tier::ClosedForm, ..spec.clone() }, "", "fig1 closed form");
    let x_closed: Vec<f64> = column(&closed(chi.clone())?, "x_mean").into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    let dense = column(&closed(linspace(0.0, 2.0 * PI, 720, false))?, "x_mean");
    let amplitude = dense.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let x_rabi: Vec<f64> = column(&rabi, "x_mean").into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    let rel_error = x_rabi.iter().zip(&x_closed).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) / amplitude;
    let rel_error = if rel_error.is_finite() && x_rabi.iter().all(|x| x.is_finite()) { rel_error } else { f64::INFINITY };
    Ok(Fig1Curve { lambda, chi, x_rabi, x_closed, amplitude, rel_error, seconds: start.elapsed().as_secs_f64() })
}

fn fig1(opts: &FigureOptions, w: &mut Writer) -> Result<Vec<GateLine>, CliError> {
    let hash = opts.hash(1);
    let dense = linspace(0.0, 2.0 * PI, 361, true);
    let mut closed_cols = Vec::new();
    let mut rabi_cols = Vec::new();
    let mut gate = Vec::new();
    let mut rabi_chi = Vec::new();
    for lambda in FIG1_LAMBDAS {
        let spec = SweepSpec::new(fig1_params().with_lambda(lambda), 0.0, 1, Axis::Chi, dense.clone(), Tier::ClosedForm);
        closed_cols.push((format!("x_lambda_{}", label(lambda)), column(&run(&spec, &hash, "fig1")?, "x_mean")));
        let c = fig1_curve(lambda, opts)?;
        eprintln!(
            "fig1: lambda {lambda}: FullRabi vs closed form max deviation {:.3}% of amplitude ({:.1} s)",
            100.0 * c.rel_error,
            c.seconds
        );
        gate.push(GateLine { lambda, rel_error: c.rel_error, passed: c.rel_error <= FIG1_TOLERANCE });
        rabi_cols.push((format!("x_lambda_{}", label(lambda)), c.x_rabi.iter().map(|&x| x.is_finite().then_some(x)).collect()));
        rabi_chi = c.chi;
    }
    w.csv("fig1_data_closed.csv", &assemble(&hash, "closed_form", "chi", &dense, closed_cols))?;
    let eta = opts.eta.unwrap_or(5e-4);
    let rabi = assemble(&hash, "full_rabi", "chi", &rabi_chi, rabi_cols)
        .with_meta("eta", eta)
        .with_meta("cutoff", opts.cutoff.unwrap_or(40));
    w.csv("fig1_data_rabi.csv", &rabi)?;
    let mut g = Table::new(&hash, "full_rabi", ["lambda", "rel_error", "tolerance", "passed"].map(String::from).to_vec());
    for l in &gate {
        g.rows.push(vec![Cell::Num(l.lambda), Cell::Num(l.rel_error), Cell::Num(FIG1_TOLERANCE), Cell::Int(l.passed as i64)]);
    }
    w.csv("fig1_data_gate.csv", &g)?;
    let mut plots = plot_lines("fig1_data_closed.csv", 2..=4, "lines lw 2");
    plots.extend(plot_lines("fig1_data_rabi.csv", 2..=4, "points pt 7"));
    w.script(
        "fig1.gp",
        &format!("set xlabel 'chi'\nset ylabel '<x>'\nset xrange [0:2*pi]\nplot {}\n", plots.join(", \\\n     ")),
    )?;
    Ok(gate)
}

fn fig2(opts: &FigureOptions, w: &mut Writer) -> Result<(), CliError> {
    let hash = opts.hash(2);
    let base = fig1_params();
    let lc = base.lambda_c_sq().sqrt();
    let crb = [Output::Crb];
    // (a) ratios to the idle probe at λ = 0.95 λ_c
    let chi = linspace(0.0, PI, 361, true);
    let at = |lambda: f64| run(&SweepSpec::new(base.with_lambda(lambda), 0.0, 1, Axis::Chi, chi.clone(), Tier::ClosedForm).with_outputs(&crb), &hash, "fig2a");
    let (work, idle) = (at(0.95 * lc)?, at(0.0)?);
    let ratio = |name: &str| -> Vec<Option<f64>> {
        column(&work, name).iter().zip(column(&idle, name)).map(|(a, b)| Some((*a)? / b?)).collect()
    };
    let a = assemble(&hash, "closed_form", "chi", &chi, vec![("dF_ratio".into(), ratio("dF")), ("dchi_ratio".into(), ratio("dchi"))])
        .with_meta("lambda", 0.95 * lc);
    w.csv("fig2_data_a.csv", &a)?;
    // (b) bounds against λ at the force-optimal phase and a quarter turn away
    let lambdas = linspace(0.0, 0.999 * lc, 400, true);
    let chi_opt = critical_structure(&base).chi_opt;
    let mut cols = Vec::new();
    for (tag, c) in [("chi_opt", chi_opt), ("chi_opt_plus_half_pi", chi_opt + 0.5 * PI)] {
        let t = run(&SweepSpec::new(base, c, 1, Axis::Lambda, lambdas.clone(), Tier::ClosedForm).with_outputs(&crb), &hash, "fig2b")?;
        cols.push((format!("dF_{tag}"), column(&t, "dF")));
        cols.push((format!("dchi_{tag}"), column(&t, "dchi")));
    }
    let b = assemble(&hash, "closed_form", "lambda", &lambdas, cols).with_meta("chi_opt", chi_opt);
    w.csv("fig2_data_b.csv", &b)?;
    w.script(
        "fig2.gp",
        "set multiplot layout 1,2\n\
         set xlabel 'chi'\nset ylabel 'ratio'\n\
         plot 'fig2_data_a.csv' using 1:2 with lines, 'fig2_data_a.csv' using 1:3 with lines\n\
         set xlabel 'lambda'\nset ylabel 'bound'\nset logscale y\n\
         plot for [c=2:5] 'fig2_data_b.csv' using 1:c with lines\n\
         unset multiplot\n",
    )?;
    Ok(())
}

pub fn fig3_params(g_over_omega: f64, kappa_t: f64, eta: f64) -> DimensionlessParams {
    DimensionlessParams::new(DimensionlessParams::lambda_from_g_over_omega(g_over_omega, eta), 0.16, 0.13)
        .with_kappa(kappa_t)
        .with_eta(eta)
}

pub const FIG3_KAPPAS: [f64; 3] = [-0.4, -0.47, -0.5];
pub const FIG3_COUPLINGS: [f64; 3] = [3.1, 3.9, 4.5];

fn fig3(opts: &FigureOptions, w: &mut Writer) -> Result<(), CliError> {
    let hash = opts.hash(3);
    let eta = opts.eta.unwrap_or(4e-3);
    let chi = PI / 7.0;
    let rabi_n = opts.rabi_points.unwrap_or(0);
    let solver = SolverSettings {
        cutoff: opts.cutoff.unwrap_or(4),
        tail_guard: opts.tail_guard.unwrap_or(1e-3),
        max_doublings: 0,
        threads: opts.threads,
        ..Default::default()
    };
    let panels: [(&str, Axis, Vec<f64>, Vec<f64>, [f64; 3]); 2] = [
        ("a", Axis::GOverOmega, linspace(0.0, 7.0, 701, true), linspace(0.5, 5.5, rabi_n, true), FIG3_KAPPAS),
        ("b", Axis::KappaT, linspace(-0.99, 0.0, 496, true), linspace(-0.95, -0.05, rabi_n, true), FIG3_COUPLINGS),
    ];
    for (panel, axis, grid, rabi_grid, family) in panels {
        let mut cols = Vec::new();
        let mut rabi_cols = Vec::new();
        for v in family {
            let (base, tag) = match axis {
                Axis::GOverOmega => (fig3_params(0.0, v, eta), format!("x_kappa_{}", label(v))),
                _ => (fig3_params(v, 0.0, eta), format!("x_g_{}", label(v))),
            };
            let mut spec = SweepSpec::new(base, chi, 2, axis, grid.clone(), Tier::ClosedForm);
            spec.allow_superradiant = true;
            cols.push((tag.clone(), column(&run(&spec, &hash, &format!("fig3{panel} {tag}"))?, "x_mean")));
            if rabi_n > 0 {
                let rspec = SweepSpec { grid: rabi_grid.clone(), tier: Tier::FullRabi, solver, ..spec };
                let t = run(&rspec, &hash, &format!("fig3{panel} {tag} FullRabi"))?;
                rabi_cols.push((tag.clone(), column(&t, "x_mean")));
                rabi_cols.push((format!("tail_mass_{}", label(v)), column(&t, "tail_mass")));
            }
        }
        let t = assemble(&hash, "closed_form", axis.name(), &grid, cols).with_meta("eta", eta).with_meta("chi", chi);
        w.csv(&format!("fig3_data_{panel}.csv"), &t)?;
        if rabi_n > 0 {
            let t = assemble(&hash, "full_rabi", axis.name(), &rabi_grid, rabi_cols)
                .with_meta("eta", eta)
                .with_meta("cutoff", solver.cutoff)
                .with_meta("tail_guard", solver.tail_guard);
            w.csv(&format!("fig3_data_{panel}_rabi.csv"), &t)?;
        }
    }
    let markers = |panel: &str| {
        if rabi_n > 0 {
            format!(", \\\n     for [c=2:6:2] 'fig3_data_{panel}_rabi.csv' using 1:c with points pt 7")
        } else {
            String::new()
        }
    };
    w.script(
        "fig3.gp",
        &format!(
            "set multiplot layout 1,2\nset ylabel '<x>'\n\
             set xlabel 'g/omega'\nplot for [c=2:4] 'fig3_data_a.csv' using 1:c with lines{}\n\
             set xlabel 'kappa/omega'\nplot for [c=2:4] 'fig3_data_b.csv' using 1:c with lines{}\n\
             unset multiplot\n",
            markers("a"),
            markers("b")
        ),
    )?;
    Ok(())
}

pub fn fig4_params() -> (DimensionlessParams, f64) {
    (DimensionlessParams::new(0.59, 0.16, 0.13), PI / 3.0)
}

fn fig4(opts: &FigureOptions, w: &mut Writer) -> Result<(), CliError> {
    let hash = opts.hash(4);
    let (base, chi) = fig4_params();
    let crb = [Output::Crb];
    // (a) ratio to κ̃ = 0 over (κ_min, 0)
    let kmin = -1.0 + base.gamma_t * base.gamma_t;
    let kappas = interior(kmin, 0.0, 400);
    let mut spec = SweepSpec::new(base, chi, 2, Axis::KappaT, kappas.clone(), Tier::ClosedForm).with_outputs(&crb);
    spec.allow_superradiant = true;
    let t = run(&spec, &hash, "fig4a")?;
    let zero = run(&SweepSpec { grid: vec![0.0], ..spec.clone() }, &hash, "fig4a")?;
    let (f0, c0) = (column(&zero, "dF")[0], column(&zero, "dchi")[0]);
    let ratio = |name: &str, r: Option<f64>| -> Vec<Option<f64>> { column(&t, name).iter().map(|v| Some((*v)? / r?)).collect() };
    let a = assemble(&hash, "closed_form", "kappa_t", &kappas, vec![("dF_ratio".into(), ratio("dF", f0)), ("dchi_ratio".into(), ratio("dchi", c0))])
        .with_meta("kappa_min", kmin);
    w.csv("fig4_data_a.csv", &a)?;
    // (b) bounds against λ with and without hopping
    let lambdas = linspace(0.0, 0.999 * base.lambda_c_sq().sqrt(), 400, true);
    let mut cols = Vec::new();
    for kappa in [-0.45, 0.0] {
        let mut s = SweepSpec::new(base.with_kappa(kappa), chi, 2, Axis::Lambda, lambdas.clone(), Tier::ClosedForm).with_outputs(&crb);
        s.allow_superradiant = true;
        let t = run(&s, &hash, &format!("fig4b kappa {kappa}"))?;
        cols.push((format!("dF_kappa_{}", label(kappa)), column(&t, "dF")));
        cols.push((format!("dchi_kappa_{}", label(kappa)), column(&t, "dchi")));
    }
    let b = assemble(&hash, "closed_form", "lambda", &lambdas, cols)
        .with_meta("lambda_plus", lambda_plus(base.gamma_t, -0.45).unwrap_or(f64::NAN));
    w.csv("fig4_data_b.csv", &b)?;
    w.script(
        "fig4.gp",
        "set multiplot layout 1,2\n\
         set xlabel 'kappa/omega'\nset ylabel 'ratio'\n\
         plot 'fig4_data_a.csv' using 1:2 with lines, 'fig4_data_a.csv' using 1:3 with lines\n\
         set xlabel 'lambda'\nset ylabel 'bound'\nset logscale y\n\
         plot 'fig4_data_b.csv' using 1:2 with lines lt 1, 'fig4_data_b.csv' using 1:3 with lines lt 2, \\\n\
         \x20    'fig4_data_b.csv' using 1:4 with lines lt 1 dt 2, 'fig4_data_b.csv' using 1:5 with lines lt 2 dt 2\n\
         unset multiplot\n",
    )?;
    Ok(())
}

/// Write figure `n`. Figure 1 fails with a validation error when its
/// consistency gate fails (the files are still written).
pub fn figure(n: u8, opts: &FigureOptions) -> Result<FigureReport, CliError> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut w = Writer { dir: &opts.out_dir, files: Vec::new() };
    let mut gate = Vec::new();
    match n {
        1 => gate = fig1(opts, &mut w)?,
        2 => fig2(opts, &mut w)?,
        3 => fig3(opts, &mut w)?,
        4 => fig4(opts, &mut w)?,
        _ => return Err(CliError::Config(format!("no figure {n}; choose 1 to 4"))),
    }
    let report = FigureReport { files: w.files, gate };
    if let Some(bad) = report.gate.iter().find(|g| !g.passed) {
        let mut msg = String::new();
        let _ = write!(msg, "figure 1 gate: lambda {} deviates {:.2}% > {}%", bad.lambda, 100.0 * bad.rel_error, 100.0 * FIG1_TOLERANCE);
        return Err(CliError::Validation(msg));
    }
    Ok(report)
}
