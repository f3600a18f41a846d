//! End-to-end consistency suite: closed forms against the Lyapunov, Gaussian and
//! Lindblad oracles, critical scaling, SQL comparisons and hopping criticality.
//! Each check returns a [`CriterionOutcome`]; nothing here panics on failure.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{covariance_single, decompose_single, mean_two_site, two_site_state};
use crate::dynamics::{
    hurwitz_critical_coupling, moment_flow, numeric_qfim_exact, steady_moments, NumericQfimOptions,
};
use crate::error::{Error, Result};
use crate::exec::{map, Execution};
use crate::metrology::{
    qfim_from_slds, qfim_gaussian_numeric, qfim_qp_basis, qfim_single_closed, qfim_two_site_closed, sld_commutator,
    sld_fock, sld_residuals, FiniteDifference, QfimResult,
};
use crate::params::{critical_structure, lambda_plus, DimensionlessParams, ModelParams};

pub const SEED: u64 = 20_240_611;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] criterion {} {}: {} ({:.2} s)", self.id, self.name, self.detail, self.seconds)
    }
}

fn outcome(id: u8, name: &'static str, start: Instant, checks: Result<Vec<(bool, String)>>) -> CriterionOutcome {
    let seconds = start.elapsed().as_secs_f64();
    match checks {
        Ok(parts) => {
            let passed = parts.iter().all(|p| p.0);
            let detail = parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ");
            CriterionOutcome { id, name, passed, detail, seconds }
        }
        Err(e) => CriterionOutcome { id, name, passed: false, detail: format!("error: {e}"), seconds },
    }
}

/// Least-squares slope of ys against xs.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn rel_fim(a: &QfimResult, b: &QfimResult) -> f64 {
    (a.fim - b.fim).amax() / b.fim.amax()
}

/// Random single-site draw with λ ≤ `reach`·λ_c.
fn single_draw(rng: &mut ChaCha8Rng, reach: f64, force: (f64, f64)) -> (DimensionlessParams, f64) {
    let gamma = rng.random_range(0.05..1.5);
    let force_t = rng.random_range(force.0..force.1);
    let mut d = DimensionlessParams::new(0.0, gamma, force_t);
    d.lambda = rng.random_range(0.0..reach) * d.lambda_c_sq().sqrt();
    (d, rng.random_range(0.0..2.0 * PI))
}

/// Random two-site draw with |κ̃| ≤ 0.9 and λ ≤ 0.98 of the critical coupling.
fn two_site_draw(rng: &mut ChaCha8Rng) -> (DimensionlessParams, f64) {
    let gamma = rng.random_range(0.05..1.5);
    let kappa = rng.random_range(-0.9..0.9);
    let d = DimensionlessParams::new(0.0, gamma, rng.random_range(0.05..2.0)).with_kappa(kappa);
    let star = critical_structure(&d).critical_coupling(true).expect("|kappa| < 1");
    (d.with_lambda(rng.random_range(0.0..0.98) * star), rng.random_range(0.0..2.0 * PI))
}

/// Criterion 2: closed-form means and covariances against the Lyapunov oracle.
pub fn oracle_triangle(exec: Execution, draws: usize) -> CriterionOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let singles: Vec<_> = (0..draws).map(|_| single_draw(&mut rng, 0.98, (0.05, 2.0))).collect();
    let pairs: Vec<_> = (0..draws).map(|_| two_site_draw(&mut rng)).collect();
    let checks = (|| {
        let s_err = map(exec, &singles, |(d, chi)| -> Result<f64> {
            let cl = covariance_single(&decompose_single(d, *chi)?);
            let ly = steady_moments(&moment_flow(d, *chi, 1))?;
            Ok((&cl.cov - &ly.cov).amax().max((&cl.mean - &ly.mean).amax()))
        });
        let t_err = map(exec, &pairs, |(d, chi)| -> Result<f64> {
            let cl = two_site_state(d, *chi)?;
            let ly = steady_moments(&moment_flow(d, *chi, 2))?;
            Ok((&cl.cov - &ly.cov).amax().max((&cl.mean - &ly.mean).amax()))
        });
        let s = s_err.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        let t = t_err.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        Ok(vec![
            (s <= 1e-9, format!("single-site max |closed - Lyapunov| = {s:.2e} over {draws} draws")),
            (t <= 1e-9, format!("two-site max |closed - Lyapunov| = {t:.2e} over {draws} draws")),
        ])
    })();
    let mut out = outcome(2, "oracle triangle", start, checks);
    if out.seconds > 10.0 {
        out.passed = false;
        out.detail.push_str("; exceeded 10 s");
    }
    out
}

/// Criterion 3: inverse consistency, Gaussian finite differences, and the full
/// operator-space numeric QFIM on the effective master equation.
pub fn qfim_consistency(exec: Execution, draws: usize, exact_draws: usize) -> CriterionOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let singles: Vec<_> = (0..draws).map(|_| single_draw(&mut rng, 0.98, (0.05, 2.0))).collect();
    let pairs: Vec<_> = (0..draws).map(|_| two_site_draw(&mut rng)).collect();
    let exact: Vec<_> = (0..exact_draws).map(|_| single_draw(&mut rng, 0.8, (0.1, 0.6))).collect();
    let fd = FiniteDifference::default();
    let checks = (|| {
        let single = map(exec, &singles, |(d, chi)| -> Result<(f64, f64)> {
            let cl = qfim_single_closed(d, *chi)?;
            let num = qfim_gaussian_numeric(
                |f, c| Ok(covariance_single(&decompose_single(&d.with_force(f), c)?)),
                (d.force_t, *chi),
                &fd,
            )?;
            Ok((cl.inverse_consistency(), rel_fim(&num, &cl)))
        });
        let double = map(exec, &pairs, |(d, chi)| -> Result<(f64, f64)> {
            let cl = qfim_two_site_closed(d, *chi)?;
            let num = qfim_gaussian_numeric(|f, c| two_site_state(&d.with_force(f), c), (d.force_t, *chi), &fd)?;
            Ok((cl.inverse_consistency(), rel_fim(&num, &cl)))
        });
        let full = map(exec, &exact, |(d, chi)| -> Result<f64> {
            let p = ModelParams::from_dimensionless(d, *chi, 1, 1.0)?;
            let num = numeric_qfim_exact(&p, &[60], &NumericQfimOptions::default())?;
            Ok(rel_fim(&num, &qfim_single_closed(d, *chi)?))
        });
        let (mut inv, mut gauss) = (0.0f64, 0.0f64);
        for r in single.into_iter().chain(double) {
            let (a, b) = r?;
            inv = inv.max(a);
            gauss = gauss.max(b);
        }
        let full = full.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        Ok(vec![
            (inv <= 1e-10, format!("max |F F^-1 - I| = {inv:.2e}")),
            (gauss <= 1e-6, format!("closed vs Gaussian finite differences: rel {gauss:.2e}")),
            (full <= 1e-4, format!("closed vs master-equation numeric QFIM (cutoff 60): rel {full:.2e}")),
        ])
    })();
    outcome(3, "QFIM consistency", start, checks)
}

/// Criterion 4: SLD defining-equation residuals and commutator on random draws.
pub fn sld_checks(exec: Execution, draws: usize) -> CriterionOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let pts: Vec<_> = (0..draws)
        .map(|_| {
            let gamma = rng.random_range(0.1..1.0);
            let mut d = DimensionlessParams::new(0.0, gamma, rng.random_range(0.1..0.8));
            d.lambda = rng.random_range(0.0..0.85) * d.lambda_c_sq().sqrt();
            (d, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let checks = (|| {
        let res = map(exec, &pts, |(d, chi)| -> Result<(f64, f64)> {
            let mut last = Error::TruncationUnsafe(f64::NAN);
            for cutoff in [50, 80, 120] {
                match sld_residuals(d, *chi, cutoff, 1e-5) {
                    Ok(r) => {
                        let s = decompose_single(d, *chi)?;
                        let sld = sld_fock(&s, d, *chi, cutoff)?;
                        let (_, c) = qfim_from_slds(&sld.rho, &sld.l_force, &sld.l_chi);
                        return Ok((r.force.max(r.chi), rel(c, sld_commutator(d))));
                    }
                    Err(e @ Error::TruncationUnsafe(_)) => last = e,
                    Err(e) => return Err(e),
                }
            }
            Err(last)
        });
        let (mut resid, mut comm) = (0.0f64, 0.0f64);
        for r in res {
            let (a, b) = r?;
            resid = resid.max(a);
            comm = comm.max(b);
        }
        Ok(vec![
            (resid <= 1e-6, format!("max |2 d rho - {{L, rho}}|_F = {resid:.2e} over {draws} draws")),
            (comm <= 1e-6, format!("commutator rel error {comm:.2e}")),
        ])
    })();
    outcome(4, "SLD residuals", start, checks)
}

/// Fig. 2 parameters: λ_c = 1.04, F̃ = 0.38.
pub fn fig2_params() -> DimensionlessParams {
    DimensionlessParams::new(0.0, (1.04f64 * 1.04 - 1.0).sqrt(), 0.38)
}

/// Criterion 5: critical exponent of δF at χ_opt, δχ·F̃ limit, and the swapped roles at χ_opt + π/2.
pub fn critical_scaling() -> CriterionOutcome {
    let start = Instant::now();
    let base = fig2_params();
    let lc = base.lambda_c_sq().sqrt();
    let f = base.force_t;
    let chi = critical_structure(&base).chi_opt;
    let checks = (|| {
        let gaps: Vec<f64> = (0..=40).map(|k| 0.1 * (1e-3f64 / 0.1).powf(k as f64 / 40.0)).collect();
        let bounds = |chi: f64| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut df = Vec::new();
            let mut dc = Vec::new();
            for g in &gaps {
                let q = qfim_single_closed(&base.with_lambda(lc * (1.0 - g)), chi)?;
                df.push(q.fim_inv[(0, 0)].sqrt());
                dc.push(q.fim_inv[(1, 1)].sqrt());
            }
            Ok((df, dc))
        };
        let lx: Vec<f64> = gaps.iter().map(|g| (lc * g).ln()).collect();
        let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
        let (df, dc) = bounds(chi)?;
        let slope_f = log_slope(&lx, &ln(&df));
        let limit = lc * lc / 2f64.sqrt();
        let chi_lim = dc.last().unwrap() * f;
        let (df2, dc2) = bounds(chi + 0.5 * PI)?;
        let slope_c = log_slope(&lx, &ln(&dc2));
        let force_lim = *df2.last().unwrap();
        Ok(vec![
            ((slope_f - 0.5).abs() <= 0.02, format!("dF exponent {slope_f:.4} at chi_opt = {chi:.4}")),
            (rel(chi_lim, limit) <= 0.01, format!("dchi*F -> {chi_lim:.5} vs lambda_c^2/sqrt2 = {limit:.5}")),
            ((slope_c - 0.5).abs() <= 0.02, format!("swapped: dchi exponent {slope_c:.4}")),
            (rel(force_lim, limit) <= 0.01, format!("swapped: dF -> {force_lim:.5}")),
        ])
    })();
    outcome(5, "critical scaling", start, checks)
}

/// Criterion 6: summed (q, p) bounds against the SQL, single site and two sites.
pub fn sql_beating() -> CriterionOutcome {
    let start = Instant::now();
    let checks = (|| {
        let mut out = Vec::new();
        for gamma in [0.16, 0.5, 0.99, 1.01] {
            let d = DimensionlessParams::new(0.0, gamma, 0.38);
            let lc2 = d.lambda_c_sq();
            let sum = qfim_qp_basis(&d.with_lambda(lc2.sqrt() * (1.0 - 1e-7)), false)?.sum_qp();
            let limit = lc2 * lc2 / 2.0;
            let ok = rel(sum, limit) < 1e-5 && ((sum < 2.0) == (gamma < 1.0));
            out.push((ok, format!("gamma {gamma}: sum {sum:.6} (limit {limit:.6}, SQL 2)")));
        }
        // λ₊² > 2 with λ₊ < λ₋ needs κ̃ > 0 and γ̃² > 1 - κ̃², hence the second case.
        for (gamma, kappa) in [(0.16, -0.45), (1.0, 0.5)] {
            let d = DimensionlessParams::new(0.0, gamma, 0.38).with_kappa(kappa);
            let lp = lambda_plus(gamma, kappa).expect("kappa > -1");
            let sum = qfim_qp_basis(&d.with_lambda(lp * (1.0 - 1e-7)), true)?.sum_qp();
            let limit = lp.powi(4) / 4.0;
            let ok = rel(sum, limit) < 1e-5 && ((sum < 1.0) == (lp * lp < 2.0));
            out.push((ok, format!("two-site gamma {gamma} kappa {kappa}: sum {sum:.6} (lambda+^2 = {:.4}, SQL 1)", lp * lp)));
        }
        Ok(out)
    })();
    outcome(6, "SQL beating", start, checks)
}

/// Fig. 3 parameters: γ̃ = 0.16, F̃ = 0.13, χ = π/7, η = 4e-3.
pub fn fig3_params(g_over_omega: f64, kappa_t: f64) -> DimensionlessParams {
    let eta = 4e-3;
    DimensionlessParams::new(DimensionlessParams::lambda_from_g_over_omega(g_over_omega, eta), 0.16, 0.13)
        .with_kappa(kappa_t)
        .with_eta(eta)
}

/// Criterion 7: Hurwitz-boundary bisection and the Fig. 3(b) divergence at κ₊.
pub fn hopping_criticality() -> CriterionOutcome {
    let start = Instant::now();
    let checks = (|| {
        let mut out = Vec::new();
        for kappa in [0.0, -0.2, -0.4, -0.47] {
            let d = DimensionlessParams::new(0.0, 0.16, 0.13).with_kappa(kappa);
            let found = hurwitz_critical_coupling(&d, 2, 1e-13)?;
            let want = lambda_plus(0.16, kappa).expect("kappa > -1");
            out.push(((found - want).abs() < 1e-8, format!("kappa {kappa}: |bisect - lambda+| = {:.1e}", (found - want).abs())));
        }
        let base = fig3_params(4.5, 0.0);
        let kp = critical_structure(&base).kappa_plus.ok_or(Error::InvalidParameter("no kappa+".into()))?;
        let chi = PI / 7.0;
        let x = |k: f64| -> Result<f64> {
            let d = base.with_kappa(k);
            let closed = mean_two_site(&d, chi)?[0];
            let oracle = steady_moments(&moment_flow(&d, chi, 2))?.mean[0];
            if (closed - oracle).abs() > 1e-9 * closed.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!("closed {closed} vs oracle {oracle}")));
            }
            Ok(closed)
        };
        let (far, near) = (x(kp + 0.05)?, x(kp + 0.005)?);
        let ratio = near.abs() / far.abs();
        out.push((ratio > 10.0, format!("|x| grows {ratio:.2}x from kappa+ + 0.05 to kappa+ + 0.005 (kappa+ = {kp:.5})")));
        Ok(out)
    })();
    outcome(7, "hopping criticality", start, checks)
}

/// Fig. 4(a) parameters: γ̃ = 0.16, λ = 0.59, χ = π/3.
pub fn fig4a_params() -> (DimensionlessParams, f64) {
    (DimensionlessParams::new(0.59, 0.16, 0.13), PI / 3.0)
}

/// Criterion 8: hopping improves both bounds over κ̃ = 0 for every normal-phase κ̃ in (κ_min, 0).
pub fn hopping_improvement(points: usize) -> CriterionOutcome {
    let start = Instant::now();
    let (base, chi) = fig4a_params();
    let kmin = -1.0 + base.gamma_t * base.gamma_t;
    let checks = (|| {
        let reference = qfim_two_site_closed(&base, chi)?;
        let (mut worst_f, mut worst_c) = (0.0f64, 0.0f64);
        let (mut normal, mut divergent, mut bad) = (0, 0, 0);
        for k in 1..points {
            let kappa = kmin * k as f64 / points as f64;
            let d = base.with_kappa(kappa);
            match qfim_two_site_closed(&d, chi) {
                Ok(q) => {
                    normal += 1;
                    worst_f = worst_f.max((q.fim_inv[(0, 0)] / reference.fim_inv[(0, 0)]).sqrt());
                    worst_c = worst_c.max((q.fim_inv[(1, 1)] / reference.fim_inv[(1, 1)]).sqrt());
                }
                Err(Error::CriticalDivergence { .. }) => {
                    let cs = critical_structure(&d);
                    let inside = matches!((cs.kappa_minus, cs.kappa_plus), (Some(a), Some(b)) if kappa >= a - 1e-9 && kappa <= b + 1e-9);
                    if inside {
                        divergent += 1;
                    } else {
                        bad += 1;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(vec![
            (worst_f < 1.0, format!("max dF(k)/dF = {worst_f:.4} over {normal} normal-phase points")),
            (worst_c < 1.0, format!("max dchi(k)/dchi = {worst_c:.4}")),
            (bad == 0, format!("{divergent} points in the superradiant window (kappa-, kappa+) flagged, {bad} elsewhere")),
        ])
    })();
    outcome(8, "hopping improvement", start, checks)
}

/// Criteria 2 to 8 with the standard sample sizes.
pub fn run_all(exec: Execution) -> Vec<CriterionOutcome> {
    vec![
        oracle_triangle(exec, 100),
        qfim_consistency(exec, 100, 4),
        sld_checks(exec, 20),
        critical_scaling(),
        sql_beating(),
        hopping_criticality(),
        hopping_improvement(2000),
    ]
}
