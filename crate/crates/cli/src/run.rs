//! Command dispatch. Each run writes `<command>.csv` and `summary.json` into
//! the output directory; a failed run writes `error.json` instead.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rrmd::law::rational::to_f64;
use rrmd::law::{standardize, validate, ContinuousTau, JointLaw, LawError, ParametricLaw};
use rrmd::mgf::{mgf_series, uniformity_statistic, MgfError};
use rrmd::montecarlo::{mdp_rate_scan, rate_trend, McError, Method, Streams};
use rrmd::renewal::{
    blackwell_gap, dri_check, renewal_inequality_check, renewal_table, DriFunction, LawFamily, RenewalError,
};
use rrmd::tilt::{eta_curve, h_function, solve_eta, TiltError, DEFAULT_TOL};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, Params, RunConfig};
use crate::output::{num, num_from_ln, Csv};

pub const TOOL: &str = "rrmd";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
    #[error(transparent)]
    Mgf(#[from] MgfError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error("{0}")]
    Unsupported(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Law(_) => "law",
            RunError::Tilt(_) => "tilt",
            RunError::Renewal(_) => "renewal",
            RunError::Mgf(_) => "mgf",
            RunError::MonteCarlo(_) => "montecarlo",
            RunError::Unsupported(_) => "unsupported",
            RunError::Io { .. } => "io",
        }
    }

    /// Body of `error.json`.
    pub fn report(&self) -> Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let RunError::Config(c) = self {
            err["problems"] = serde_json::to_value(&c.problems).expect("serializable");
        }
        json!({ "tool": TOOL, "version": VERSION, "error": err })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: Value,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

struct Checks(Vec<Value>);

impl Checks {
    fn at_most(&mut self, name: &str, value: f64, limit: Option<f64>) {
        if let Some(limit) = limit {
            self.0.push(json!({ "name": name, "value": value, "limit": limit, "pass": value <= limit }));
        }
    }

    fn holds(&mut self, name: &str, pass: bool) {
        self.0.push(json!({ "name": name, "pass": pass }));
    }

    fn passed(&self) -> bool {
        self.0.iter().all(|c| c["pass"] == Value::Bool(true))
    }
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Writes `error.json` into `out_dir`.
pub fn write_error(out_dir: &Path, err: &RunError) -> Result<PathBuf, RunError> {
    std::fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let path = out_dir.join("error.json");
    write(&path, &(serde_json::to_string_pretty(&err.report()).expect("serializable") + "\n"))?;
    Ok(path)
}

/// Executes a validated config.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, RunError> {
    let law = if cfg.standardize { standardize(&cfg.law)? } else { cfg.law.clone() };
    let moments = validate(&law)?;
    let mut checks = Checks(Vec::new());
    let (csv, results) = match &cfg.params {
        Params::Eta { lambda, tol, max_ratio_deviation } => eta(&law, lambda, *tol, *max_ratio_deviation, &mut checks)?,
        Params::Mgf { lambda, t, max_relative_gap } => mgf(&law, lambda, t, *max_relative_gap, &mut checks)?,
        Params::Renewal { n, inequality_trials } => renewal(&law, *n, *inequality_trials, cfg.seed, &mut checks)?,
        Params::Blackwell { u, v, tilt_lambdas, bracket_delta, max_gap, from } => {
            let family = match (&law, tilt_lambdas) {
                (JointLaw::Discrete(d), Some(ls)) => LawFamily::tilted(d, ls)?,
                (JointLaw::Discrete(d), None) => LawFamily::lattice(vec![d.tau_marginal()])?,
                (JointLaw::Parametric(_), Some(_)) => {
                    return Err(RunError::Unsupported("tilt_lambdas needs a discrete law".into()))
                }
                (JointLaw::Parametric(p), None) => {
                    let delta = bracket_delta.clone().ok_or_else(|| {
                        RunError::Unsupported("a nonlattice law needs bracket_delta for the blackwell command".into())
                    })?;
                    LawFamily::continuous(vec![continuous_tau(p)?], delta)?
                }
            };
            let v = v.unwrap_or_else(|| to_f64(family.span()));
            blackwell(&family, v, u, *max_gap, *from, &mut checks)?
        }
        Params::Dri { lambda, delta, n, max_tail, max_riemann_gap } => {
            dri(&law, lambda, delta, n, *max_tail, *max_riemann_gap, &mut checks)?
        }
        Params::Mdp { schedule, n_samples, methods, tracking_z, trend } => {
            mdp(&law, schedule, *n_samples, methods, cfg.seed, *tracking_z, *trend, &mut checks)?
        }
    };
    let passed = checks.passed();
    let summary = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "config": cfg.raw,
        "law": { "kind": law.kind(), "standardized_for_run": cfg.standardize, "moments": moments },
        "results": results,
        "thresholds": checks.0,
        "passed": passed,
    });
    std::fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let csv_path = out_dir.join(format!("{}.csv", cfg.command.name()));
    let summary_path = out_dir.join("summary.json");
    write(&csv_path, &csv)?;
    write(&summary_path, &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"))?;
    Ok(Outcome { passed, summary, csv_path, summary_path })
}

fn continuous_tau(p: &ParametricLaw) -> Result<Arc<dyn ContinuousTau>, RunError> {
    match p {
        ParametricLaw::ScaledSqrt(s) => Ok(Arc::new(s.tau)),
        ParametricLaw::Custom(_) => Err(RunError::Unsupported("custom parametric laws have no CDF".into())),
    }
}

fn eta(law: &JointLaw, lambda: &[f64], tol: f64, max_dev: Option<f64>, checks: &mut Checks) -> Result<(String, Value), RunError> {
    let points = eta_curve(law, lambda, tol)?;
    let mut csv = Csv::new(&["lambda", "eta", "ratio", "drift"]);
    for p in &points {
        csv.row(&[num(p.tilt.lambda), num(p.tilt.eta), num(p.ratio), num(p.drift)]);
    }
    let dev = points.iter().map(|p| (p.ratio - 1.0).abs()).fold(0.0, f64::max);
    let residual = points.iter().map(|p| p.tilt.residual.abs()).fold(0.0, f64::max);
    checks.at_most("max_ratio_deviation", dev, max_dev);
    Ok((csv.into_string(), json!({ "points": points.len(), "max_ratio_deviation": dev, "max_residual": residual })))
}

fn mgf(law: &JointLaw, lambda: &[f64], t: &[f64], max_gap: Option<f64>, checks: &mut Checks) -> Result<(String, Value), RunError> {
    let mut csv = Csv::new(&["lambda", "t", "direct", "tilted", "normalized", "limit"]);
    let mut worst = (0.0f64, f64::NAN, f64::NAN);
    for &l in lambda {
        let s = mgf_series(law, l, t)?;
        let norm = s.normalized();
        for (i, &ti) in s.t.iter().enumerate() {
            csv.row(&[num(l), num(ti), num_from_ln(s.ln_direct[i]), num_from_ln(s.ln_tilted[i]), num(norm[i]), num(s.limit)]);
        }
        for (i, g) in s.relative_gaps().into_iter().enumerate() {
            if g > worst.0 || (g.is_nan() && !worst.0.is_nan()) {
                worst = (g, l, s.t[i]);
            }
        }
    }
    let uni = uniformity_statistic(law, lambda, t)?;
    checks.at_most("max_relative_gap", worst.0, max_gap);
    Ok((
        csv.into_string(),
        json!({
            "max_relative_gap": worst.0,
            "argmax": { "lambda": worst.1, "t": worst.2 },
            "uniformity": { "sup": uni.sup, "lambda": uni.lambda, "t": uni.t },
        }),
    ))
}

fn renewal(law: &JointLaw, n: usize, trials: usize, seed: u64, checks: &mut Checks) -> Result<(String, Value), RunError> {
    let d = law
        .as_discrete()
        .ok_or_else(|| RunError::Unsupported("renewal tables need a discrete law; use blackwell with bracket_delta".into()))?;
    let table = renewal_table(&d.tau_marginal(), &d.span(), n)?;
    let delta = table.delta_f64();
    let mut csv = Csv::new(&["n", "t", "mass"]);
    for (k, m) in table.masses().iter().enumerate() {
        csv.row(&[k.to_string(), num(k as f64 * delta), num(*m)]);
    }
    let mut results = json!({
        "delta": rrmd::law::format_rational(table.delta()),
        "inverse_mean": table.inv_mean(),
        "last_mass": table.masses().last().copied(),
    });
    if trials > 0 {
        let verdict = renewal_inequality_check(&table, trials, &mut Streams::new(seed).rng(0));
        checks.holds("renewal_inequality", verdict.is_ok());
        results["inequality"] = match verdict {
            Ok(()) => json!({ "trials": trials, "violation": null }),
            Err(w) => json!({ "trials": trials, "violation": { "u": w.u, "v": w.v, "left": w.left, "right": w.right } }),
        };
    }
    Ok((csv.into_string(), results))
}

fn blackwell(family: &LawFamily, v: f64, u: &[f64], max_gap: Option<f64>, from: f64, checks: &mut Checks) -> Result<(String, Value), RunError> {
    let rows = blackwell_gap(family, v, u)?;
    let mut csv = Csv::new(&["u", "gap", "argmax"]);
    for r in &rows {
        csv.row(&[num(r.u), num(r.gap), r.argmax.to_string()]);
    }
    let tail_gap = rows.iter().filter(|r| r.u >= from).map(|r| r.gap).fold(0.0, f64::max);
    checks.at_most("max_gap", tail_gap, max_gap);
    Ok((csv.into_string(), json!({ "v": v, "members": family.members().len(), "from": from, "max_gap_from": tail_gap })))
}

fn dri(
    law: &JointLaw,
    lambda: &[f64],
    delta: &[f64],
    n: &[usize],
    max_tail: Option<f64>,
    max_gap: Option<f64>,
    checks: &mut Checks,
) -> Result<(String, Value), RunError> {
    let horizon = n.iter().copied().max().unwrap_or(0) as f64;
    let step = match law {
        JointLaw::Discrete(d) => to_f64(&d.span()),
        JointLaw::Parametric(_) => 1.0,
    };
    let len = (horizon / step).ceil() as usize + 2;
    let hs = lambda
        .iter()
        .map(|&l| Ok(h_function(&solve_eta(law, l, DEFAULT_TOL)?, len)?))
        .collect::<Result<Vec<_>, RunError>>()?;
    let family: Vec<DriFunction> = hs.iter().map(DriFunction::from_h).collect();
    let report = dri_check(&family, delta, n);
    let mut csv = Csv::new(&["curve", "abscissa", "value"]);
    for (k, v) in &report.tail_index_curve {
        csv.row(&["tail".to_string(), k.to_string(), num(*v)]);
    }
    for (d, v) in &report.riemann_gap_curve {
        csv.row(&["riemann_gap".to_string(), num(*d), num(*v)]);
    }
    let last_tail = report.tail_index_curve.last().map_or(0.0, |t| t.1);
    let finest = report.riemann_gap_curve.iter().fold((f64::INFINITY, 0.0), |acc, &(d, g)| if d < acc.0 { (d, g) } else { acc });
    checks.at_most("max_tail", last_tail, max_tail);
    checks.at_most("max_riemann_gap", finest.1, max_gap);
    Ok((csv.into_string(), serde_json::to_value(&report).expect("serializable")))
}

#[allow(clippy::too_many_arguments)]
fn mdp(
    law: &JointLaw,
    schedule: &[(f64, f64)],
    n_samples: u64,
    methods: &[Method],
    seed: u64,
    tracking_z: Option<f64>,
    trend: bool,
    checks: &mut Checks,
) -> Result<(String, Value), RunError> {
    let rows = mdp_rate_scan(law, schedule, n_samples, methods, &Streams::new(seed))?;
    let mut csv = Csv::new(&["t", "x", "method", "p_hat", "std_err", "rate", "reference"]);
    for r in &rows {
        csv.row(&[num(r.t), num(r.x), r.method.as_str().to_string(), num(r.p_hat), num(r.std_err), num(r.rate), num(r.reference())]);
    }
    let mut trends = serde_json::Map::new();
    for &m in methods {
        let of_method: Vec<_> = rows.iter().filter(|r| r.method == m).cloned().collect();
        let tr = rate_trend(&of_method);
        if trend {
            checks.holds(&format!("{}_rate_decreasing", m.as_str()), tr.decreasing && tr.above_half);
        }
        if let Some(z) = tracking_z {
            let worst = tr.tracking_z.iter().copied().fold(0.0, f64::max);
            checks.at_most(&format!("{}_tracking_z", m.as_str()), worst, Some(z));
        }
        trends.insert(m.as_str().into(), serde_json::to_value(&tr).expect("serializable"));
    }
    Ok((csv.into_string(), json!({ "estimates": rows, "trend": trends })))
}
