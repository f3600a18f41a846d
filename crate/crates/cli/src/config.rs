//! Sweep configuration: a flat `key = value` file with `[section]` headers.
//!
//! ```text
//! # comments start with '#' or ';'
//! [model]
//! lambda = 0.9            # or lambda_over_critical, or g_over_omega (uses eta)
//! gamma_t = 0.2857        # or lambda_c, with gamma_t = sqrt(lambda_c^2 - 1)
//! force_t = 0.38
//! chi = 0.785398
//! kappa_t = 0             # hopping, two sites only
//! eta = 4e-3              # omega / Omega
//! sites = 1               # 1 or 2
//!
//! [sweep]
//! axis = chi              # lambda | chi | kappa_t | g_over_omega
//! start = 0
//! stop = 6.283185307179586
//! points = 64
//! endpoint = false        # include stop
//! # values = 0.1, 0.2    (explicit grid instead of start/stop/points)
//! tier = closed_form      # closed_form | lyapunov | full_rabi
//! outputs = means, qfim, crb, sum_qp   # plus decomposition
//! nu = 1
//! allow_superradiant = false
//!
//! [solver]                # full_rabi tier
//! cutoff = 40
//! tail_guard = 1e-8
//! max_doublings = 3
//! convergence_check = false
//! euler_step = 0.5
//! threads = 0             # 0 = available parallelism
//!
//! [output]
//! path = sweep.csv        # stdout when absent
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use dpsense::params::{phase_region, DimensionlessParams, PhaseRegion};

use crate::sweep::{Axis, Output, SolverSettings, SweepSpec, Tier};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, 0 when the problem is not tied to one line.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.field, self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["lambda", "lambda_over_critical", "g_over_omega", "gamma_t", "lambda_c", "force_t", "chi", "kappa_t", "eta", "sites"]),
    ("sweep", &["axis", "start", "stop", "points", "endpoint", "values", "tier", "outputs", "nu", "allow_superradiant"]),
    ("solver", &["cutoff", "tail_guard", "max_doublings", "convergence_check", "euler_step", "threads"]),
    ("output", &["path"]),
];

/// Raw entries keyed by "section.key", with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section: Option<&str> = None;
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err(line, body, "unterminated section header"))?.trim();
                let known = SCHEMA.iter().find(|s| s.0 == name).ok_or_else(|| err(line, name, "unknown section"))?;
                section = Some(known.0);
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| err(line, body, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| err(line, key, "key outside any [section]"))?;
            let keys = SCHEMA.iter().find(|s| s.0 == sec).map(|s| s.1).unwrap_or(&[]);
            if !keys.contains(&key) {
                return Err(err(line, &format!("{sec}.{key}"), "unknown key"));
            }
            let full = format!("{sec}.{key}");
            if let Some((first, _)) = entries.get(&full) {
                return Err(err(line, &full, format!("duplicate key (first set on line {first})")));
            }
            entries.insert(full, (line, value.to_string()));
        }
        Ok(Self { entries })
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(*line, key, format!("expected a finite number, got '{v}'")))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|(line, v)| v.parse::<usize>().map_err(|_| err(*line, key, format!("expected a non-negative integer, got '{v}'"))))
            .transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|(line, v)| match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(err(*line, key, format!("expected true or false, got '{v}'"))),
            })
            .transpose()
    }

    fn line(&self, key: &str) -> usize {
        self.raw(key).map_or(0, |r| r.0)
    }

    /// At most one of `keys` may be set.
    fn exclusive<'k>(&self, keys: &[&'k str]) -> Result<Option<&'k str>, ConfigError> {
        let set: Vec<&'k str> = keys.iter().copied().filter(|k| self.entries.contains_key(*k)).collect();
        match set.as_slice() {
            [] => Ok(None),
            [one] => Ok(Some(one)),
            [_, second, ..] => Err(err(self.line(second), second, format!("conflicts with {}", set[0]))),
        }
    }
}

fn parse_list<T>(raw: &RawConfig, key: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<Vec<T>>, ConfigError> {
    let Some((line, v)) = raw.raw(key) else { return Ok(None) };
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| err(*line, key, format!("bad list entry '{s}'"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn model(raw: &RawConfig) -> Result<(DimensionlessParams, f64, usize), ConfigError> {
    let gamma = match raw.exclusive(&["model.gamma_t", "model.lambda_c"])? {
        Some("model.lambda_c") => {
            let lc = raw.f64("model.lambda_c")?.unwrap_or(1.0);
            if lc < 1.0 {
                return Err(err(raw.line("model.lambda_c"), "model.lambda_c", "must be at least 1"));
            }
            (lc * lc - 1.0).sqrt()
        }
        _ => raw.f64("model.gamma_t")?.ok_or_else(|| err(0, "model.gamma_t", "required (or model.lambda_c)"))?,
    };
    let force = raw.f64("model.force_t")?.ok_or_else(|| err(0, "model.force_t", "required"))?;
    let eta = raw.f64("model.eta")?.unwrap_or(4e-3);
    let kappa = raw.f64("model.kappa_t")?.unwrap_or(0.0);
    let sites = raw.usize("model.sites")?.unwrap_or(1);
    if !(1..=2).contains(&sites) {
        return Err(err(raw.line("model.sites"), "model.sites", "must be 1 or 2"));
    }
    if sites == 1 && kappa != 0.0 {
        return Err(err(raw.line("model.kappa_t"), "model.kappa_t", "hopping needs sites = 2"));
    }
    let mut d = DimensionlessParams::new(0.0, gamma, force).with_kappa(kappa).with_eta(eta);
    d.lambda = match raw.exclusive(&["model.lambda", "model.lambda_over_critical", "model.g_over_omega"])? {
        Some("model.lambda_over_critical") => {
            let frac = raw.f64("model.lambda_over_critical")?.unwrap_or(0.0);
            let star = dpsense::params::critical_structure(&d)
                .critical_coupling(sites == 2)
                .ok_or_else(|| err(raw.line("model.lambda_over_critical"), "model.lambda_over_critical", "no critical coupling for this hopping"))?;
            frac * star
        }
        Some("model.g_over_omega") => DimensionlessParams::lambda_from_g_over_omega(raw.f64("model.g_over_omega")?.unwrap_or(0.0), eta),
        _ => raw.f64("model.lambda")?.unwrap_or(0.0),
    };
    d.validate().map_err(|e| err(0, "model", e.to_string()))?;
    let chi = raw.f64("model.chi")?.unwrap_or(0.0);
    Ok((d, chi, sites))
}

fn grid(raw: &RawConfig) -> Result<Vec<f64>, ConfigError> {
    if let Some(v) = parse_list(raw, "sweep.values", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))? {
        for key in ["sweep.start", "sweep.stop", "sweep.points"] {
            if raw.raw(key).is_some() {
                return Err(err(raw.line(key), key, "conflicts with sweep.values"));
            }
        }
        return Ok(v);
    }
    let n = raw.usize("sweep.points")?.ok_or_else(|| err(0, "sweep.points", "required (or sweep.values)"))?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let start = raw.f64("sweep.start")?.ok_or_else(|| err(0, "sweep.start", "required"))?;
    let stop = raw.f64("sweep.stop")?.ok_or_else(|| err(0, "sweep.stop", "required"))?;
    let endpoint = raw.bool("sweep.endpoint")?.unwrap_or(false);
    if n == 1 {
        return Ok(vec![start]);
    }
    let div = if endpoint { (n - 1) as f64 } else { n as f64 };
    Ok((0..n).map(|k| start + (stop - start) * k as f64 / div).collect())
}

/// Build and validate a sweep from config text.
pub fn parse_sweep(text: &str) -> Result<(SweepSpec, Option<PathBuf>), ConfigError> {
    let raw = RawConfig::parse(text)?;
    let (base, chi, sites) = model(&raw)?;
    let axis_line = raw.line("sweep.axis");
    let axis = match raw.raw("sweep.axis").map(|r| r.1.as_str()) {
        Some(name) => Axis::parse(name).ok_or_else(|| err(axis_line, "sweep.axis", format!("unknown axis '{name}'")))?,
        None => return Err(err(0, "sweep.axis", "required")),
    };
    if axis == Axis::KappaT && sites != 2 {
        return Err(err(axis_line, "sweep.axis", "kappa_t sweeps need sites = 2"));
    }
    let tier = match raw.raw("sweep.tier") {
        Some((line, name)) => Tier::parse(name).ok_or_else(|| err(*line, "sweep.tier", format!("unknown tier '{name}'")))?,
        None => Tier::ClosedForm,
    };
    let outputs = parse_list(&raw, "sweep.outputs", Output::parse)?.unwrap_or_else(|| vec![Output::Means]);
    if outputs.contains(&Output::Decomposition) && (tier != Tier::ClosedForm || sites != 1) {
        return Err(err(raw.line("sweep.outputs"), "sweep.outputs", "decomposition needs tier closed_form and sites = 1"));
    }
    let nu = raw.usize("sweep.nu")?.unwrap_or(1);
    if nu == 0 {
        return Err(err(raw.line("sweep.nu"), "sweep.nu", "must be at least 1"));
    }
    let grid = grid(&raw)?;
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(err(raw.line("sweep.values").max(raw.line("sweep.points")), "sweep grid", "must be strictly monotone"));
    }
    let solver = SolverSettings {
        cutoff: raw.usize("solver.cutoff")?.unwrap_or(40),
        tail_guard: raw.f64("solver.tail_guard")?.unwrap_or(dpsense::dynamics::DEFAULT_TAIL_GUARD),
        max_doublings: raw.usize("solver.max_doublings")?.unwrap_or(3),
        convergence_check: raw.bool("solver.convergence_check")?.unwrap_or(false),
        euler_step: raw.f64("solver.euler_step")?.unwrap_or(0.5),
        threads: raw.usize("solver.threads")?.unwrap_or(0),
    };
    if solver.cutoff < 4 {
        return Err(err(raw.line("solver.cutoff"), "solver.cutoff", "must be at least 4"));
    }
    let spec = SweepSpec {
        base,
        chi,
        sites,
        axis,
        grid,
        outputs,
        tier,
        nu: nu as u32,
        allow_superradiant: raw.bool("sweep.allow_superradiant")?.unwrap_or(false),
        solver,
    };
    if !spec.allow_superradiant {
        for &v in &spec.grid {
            let (d, _) = spec.point(v);
            if phase_region(&d, sites == 2) == PhaseRegion::Superradiant {
                return Err(err(axis_line, "sweep grid", format!("{} = {v} is in the superradiant phase (set allow_superradiant = true to keep it)", axis.name())));
            }
        }
    }
    let out = raw.raw("output.path").map(|r| PathBuf::from(&r.1));
    Ok((spec, out))
}
