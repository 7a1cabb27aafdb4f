//! Run configuration: a JSON object with a `command`, a `law` (path relative
//! to the config file, or an inline law object) and command parameters.
//!
//! Grids are either explicit lists or `{"start", "stop", "step"}` with
//! round((stop − start)/step) + 1 points. Numbers may be JSON numbers or
//! rational strings such as "3/2".

use std::fmt;
use std::path::{Path, PathBuf};

use rrmd::law::file::law_from_value;
use rrmd::law::rational::to_f64;
use rrmd::law::{parse_rational, JointLaw, Rational};
use serde::Serialize;
use serde_json::{Map, Value};

/// Upper bound on the number of points in one grid.
const MAX_GRID: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Eta,
    Mgf,
    Renewal,
    Blackwell,
    Dri,
    Mdp,
    IdentityCheck,
}

impl CommandKind {
    pub const ALL: [CommandKind; 7] = [
        CommandKind::Eta,
        CommandKind::Mgf,
        CommandKind::Renewal,
        CommandKind::Blackwell,
        CommandKind::Dri,
        CommandKind::Mdp,
        CommandKind::IdentityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Eta => "eta",
            CommandKind::Mgf => "mgf",
            CommandKind::Renewal => "renewal",
            CommandKind::Blackwell => "blackwell",
            CommandKind::Dri => "dri",
            CommandKind::Mdp => "mdp",
            CommandKind::IdentityCheck => "identity-check",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Parameter keys accepted besides the common ones.
    fn params(self) -> &'static [&'static str] {
        match self {
            CommandKind::Eta => &["lambda", "tol"],
            CommandKind::Mgf | CommandKind::IdentityCheck => &["lambda", "t"],
            CommandKind::Renewal => &["n", "inequality_trials"],
            CommandKind::Blackwell => &["u", "v", "tilt_lambdas", "bracket_delta"],
            CommandKind::Dri => &["lambda", "delta", "n"],
            CommandKind::Mdp => &["schedule", "n_samples", "methods"],
        }
    }

    fn thresholds(self) -> &'static [&'static str] {
        match self {
            CommandKind::Eta => &["max_ratio_deviation"],
            CommandKind::Mgf | CommandKind::IdentityCheck => &["max_relative_gap"],
            CommandKind::Renewal => &[],
            CommandKind::Blackwell => &["max_gap", "from"],
            CommandKind::Dri => &["max_tail", "max_riemann_gap"],
            CommandKind::Mdp => &["tracking_z", "trend"],
        }
    }
}

const COMMON: [&str; 5] = ["command", "law", "standardize", "seed", "thresholds"];

/// Default two-route tolerance of `identity-check`.
pub const IDENTITY_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Eta { lambda: Vec<f64>, tol: f64, max_ratio_deviation: Option<f64> },
    Mgf { lambda: Vec<f64>, t: Vec<f64>, max_relative_gap: Option<f64> },
    Renewal { n: usize, inequality_trials: usize },
    Blackwell { u: Vec<f64>, v: Option<f64>, tilt_lambdas: Option<Vec<f64>>, bracket_delta: Option<Rational>, max_gap: Option<f64>, from: f64 },
    Dri { lambda: Vec<f64>, delta: Vec<f64>, n: Vec<usize>, max_tail: Option<f64>, max_riemann_gap: Option<f64> },
    Mdp { schedule: Vec<(f64, f64)>, n_samples: u64, methods: Vec<rrmd::montecarlo::Method>, tracking_z: Option<f64>, trend: bool },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    /// Law file, or `None` for an inline law.
    pub law_path: Option<PathBuf>,
    pub law: JointLaw,
    pub standardize: bool,
    pub seed: u64,
    pub params: Params,
    /// The configuration as given, for provenance.
    pub raw: Value,
}

impl RunConfig {
    /// Replaces the seed, keeping the embedded config in step.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Value::Object(m) = &mut self.raw {
            m.insert("seed".into(), Value::from(seed));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Problem {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub problems: Vec<Problem>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config:")?;
        for p in &self.problems {
            write!(f, " {}: {};", p.field, p.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Checker<'a> {
    obj: &'a Map<String, Value>,
    problems: Vec<Problem>,
}

impl<'a> Checker<'a> {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.problems.push(Problem { field: field.into(), message: message.into() });
    }

    fn number_value(&mut self, field: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => match parse_rational(s) {
                Ok(r) => Some(to_f64(&r)),
                Err(e) => {
                    self.fail(field, format!("malformed rational {s:?}: {e}"));
                    None
                }
            },
            _ => {
                self.fail(field, "expected a number or a rational string");
                None
            }
        }
    }

    fn number(&mut self, obj: &Map<String, Value>, field: &str, required: bool) -> Option<f64> {
        match obj.get(field) {
            None if required => {
                self.fail(field, "missing");
                None
            }
            None => None,
            Some(v) => {
                let x = self.number_value(field, v)?;
                if x.is_finite() {
                    Some(x)
                } else {
                    self.fail(field, "must be finite");
                    None
                }
            }
        }
    }

    fn integer(&mut self, obj: &Map<String, Value>, field: &str, required: bool) -> Option<u64> {
        match obj.get(field) {
            None if required => {
                self.fail(field, "missing");
                None
            }
            None => None,
            Some(v) => v.as_u64().or_else(|| {
                self.fail(field, "expected a nonnegative integer");
                None
            }),
        }
    }

    fn grid(&mut self, field: &str, required: bool) -> Option<Vec<f64>> {
        let v = match self.obj.get(field) {
            None => {
                if required {
                    self.fail(field, "missing");
                }
                return None;
            }
            Some(v) => v,
        };
        match v {
            Value::Array(items) => {
                let before = self.problems.len();
                let out: Vec<f64> = items
                    .iter()
                    .enumerate()
                    .filter_map(|(i, x)| self.number_value(&format!("{field}[{i}]"), x))
                    .collect();
                if self.problems.len() > before {
                    return None;
                }
                if out.is_empty() {
                    self.fail(field, "grid is empty");
                    return None;
                }
                if out.iter().any(|x| !x.is_finite()) {
                    self.fail(field, "grid values must be finite");
                    return None;
                }
                Some(out)
            }
            Value::Object(spec) => {
                for k in spec.keys() {
                    if !["start", "stop", "step"].contains(&k.as_str()) {
                        self.fail(&format!("{field}.{k}"), "unknown grid key");
                    }
                }
                let start = self.number(spec, "start", true);
                let stop = self.number(spec, "stop", true);
                let step = self.number(spec, "step", true);
                let (start, stop, step) = (start?, stop?, step?);
                if !(step > 0.0) || stop < start {
                    self.fail(field, "need step > 0 and stop ≥ start");
                    return None;
                }
                let count = ((stop - start) / step).round() + 1.0;
                if count > MAX_GRID as f64 {
                    self.fail(field, format!("grid has {count} points, limit {MAX_GRID}"));
                    return None;
                }
                Some((0..count as usize).map(|i| start + i as f64 * step).collect())
            }
            _ => {
                self.fail(field, "expected a list or {start, stop, step}");
                None
            }
        }
    }
}

/// Parses and validates a config; `base_dir` resolves relative law paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        problems: vec![Problem { field: "<root>".into(), message: format!("not valid JSON: {e}") }],
    })?;
    let obj = match &raw {
        Value::Object(m) => m,
        _ => {
            return Err(ConfigError {
                problems: vec![Problem { field: "<root>".into(), message: "expected a JSON object".into() }],
            })
        }
    };
    let mut c = Checker { obj, problems: Vec::new() };

    let command = match obj.get("command") {
        None => {
            c.fail("command", "missing");
            None
        }
        Some(Value::String(s)) => CommandKind::parse(s).or_else(|| {
            let names: Vec<&str> = CommandKind::ALL.iter().map(|k| k.name()).collect();
            c.fail("command", format!("unknown command {s:?}; expected one of {}", names.join(", ")));
            None
        }),
        Some(_) => {
            c.fail("command", "expected a string");
            None
        }
    };

    if let Some(cmd) = command {
        for k in obj.keys() {
            if !COMMON.contains(&k.as_str()) && !cmd.params().contains(&k.as_str()) {
                c.fail(k, format!("unknown field for command {}", cmd.name()));
            }
        }
    }

    let (law_path, law) = match obj.get("law") {
        None => {
            c.fail("law", "missing");
            (None, None)
        }
        Some(Value::String(p)) => {
            let path = base_dir.join(p);
            let law = match std::fs::read_to_string(&path) {
                Err(e) => {
                    c.fail("law", format!("cannot read law file {}: {e}", path.display()));
                    None
                }
                Ok(text) => match serde_json::from_str::<Value>(&text).map_err(|e| e.to_string()).and_then(|v| {
                    law_from_value(&v).map_err(|e| e.to_string())
                }) {
                    Ok(l) => Some(l),
                    Err(e) => {
                        c.fail("law", format!("law file {}: {e}", path.display()));
                        None
                    }
                },
            };
            (Some(path), law)
        }
        Some(v @ Value::Object(_)) => match law_from_value(v) {
            Ok(l) => (None, Some(l)),
            Err(e) => {
                c.fail("law", e.to_string());
                (None, None)
            }
        },
        Some(_) => {
            c.fail("law", "expected a path or an inline law object");
            (None, None)
        }
    };

    let standardize = match obj.get("standardize") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            c.fail("standardize", "expected a boolean");
            false
        }
    };

    let seed = c.integer(obj, "seed", command == Some(CommandKind::Mdp));

    let empty = Map::new();
    let thresholds = match obj.get("thresholds") {
        None => &empty,
        Some(Value::Object(m)) => m,
        Some(_) => {
            c.fail("thresholds", "expected an object");
            &empty
        }
    };
    if let Some(cmd) = command {
        for k in thresholds.keys() {
            if !cmd.thresholds().contains(&k.as_str()) {
                c.fail(&format!("thresholds.{k}"), format!("unknown threshold for command {}", cmd.name()));
            }
        }
    }
    let threshold = |c: &mut Checker, name: &str| {
        let x = c.number(thresholds, name, false);
        if let Some(v) = x {
            if v < 0.0 {
                c.fail(&format!("thresholds.{name}"), "must be nonnegative");
            }
        }
        x
    };

    let params = command.and_then(|cmd| match cmd {
        CommandKind::Eta => {
            let lambda = c.grid("lambda", true);
            let tol = c.number(obj, "tol", false).unwrap_or(rrmd::tilt::DEFAULT_TOL);
            let max_ratio_deviation = threshold(&mut c, "max_ratio_deviation");
            Some(Params::Eta { lambda: lambda?, tol, max_ratio_deviation })
        }
        CommandKind::Mgf | CommandKind::IdentityCheck => {
            let lambda = c.grid("lambda", true);
            let t = c.grid("t", true);
            if let Some(ts) = &t {
                if ts.iter().any(|x| *x < 0.0) {
                    c.fail("t", "times must be nonnegative");
                }
            }
            let gap = threshold(&mut c, "max_relative_gap");
            let gap = if cmd == CommandKind::IdentityCheck { Some(gap.unwrap_or(IDENTITY_GAP)) } else { gap };
            Some(Params::Mgf { lambda: lambda?, t: t?, max_relative_gap: gap })
        }
        CommandKind::Renewal => {
            let n = c.integer(obj, "n", true);
            let trials = c.integer(obj, "inequality_trials", false).unwrap_or(0);
            Some(Params::Renewal { n: n? as usize, inequality_trials: trials as usize })
        }
        CommandKind::Blackwell => {
            let u = c.grid("u", true);
            let v = c.number(obj, "v", false);
            if v.is_some_and(|v| !(v > 0.0)) {
                c.fail("v", "must be positive");
            }
            let tilt_lambdas = c.grid("tilt_lambdas", false);
            let bracket_delta = match obj.get("bracket_delta") {
                None => None,
                Some(Value::String(s)) => match parse_rational(s) {
                    Ok(r) if r > Rational::from_integer(0.into()) => Some(r),
                    Ok(_) => {
                        c.fail("bracket_delta", "must be positive");
                        None
                    }
                    Err(e) => {
                        c.fail("bracket_delta", format!("malformed rational {s:?}: {e}"));
                        None
                    }
                },
                Some(_) => {
                    c.fail("bracket_delta", "expected a rational string such as \"1/64\"");
                    None
                }
            };
            let max_gap = threshold(&mut c, "max_gap");
            let from = threshold(&mut c, "from").unwrap_or(0.0);
            Some(Params::Blackwell { u: u?, v, tilt_lambdas, bracket_delta, max_gap, from })
        }
        CommandKind::Dri => {
            let lambda = c.grid("lambda", true);
            let delta = c.grid("delta", true);
            if delta.as_ref().is_some_and(|d| d.iter().any(|x| !(*x > 0.0))) {
                c.fail("delta", "mesh sizes must be positive");
            }
            let n = c.grid("n", true);
            let n_int = n.as_ref().and_then(|n| {
                if n.iter().all(|x| *x >= 1.0 && x.fract() == 0.0) {
                    Some(n.iter().map(|x| *x as usize).collect::<Vec<_>>())
                } else {
                    c.fail("n", "block indices must be positive integers");
                    None
                }
            });
            let max_tail = threshold(&mut c, "max_tail");
            let max_riemann_gap = threshold(&mut c, "max_riemann_gap");
            Some(Params::Dri { lambda: lambda?, delta: delta?, n: n_int?, max_tail, max_riemann_gap })
        }
        CommandKind::Mdp => {
            let schedule = match obj.get("schedule") {
                None => {
                    c.fail("schedule", "missing");
                    None
                }
                Some(Value::Array(items)) if !items.is_empty() => {
                    let before = c.problems.len();
                    let pts: Vec<(f64, f64)> = items
                        .iter()
                        .enumerate()
                        .filter_map(|(i, p)| {
                            let f = format!("schedule[{i}]");
                            match p.as_array().map(|a| a.as_slice()) {
                                Some([t, x]) => {
                                    let t = c.number_value(&f, t);
                                    let x = c.number_value(&f, x);
                                    match (t, x) {
                                        (Some(t), Some(x)) if t > 0.0 && x > 0.0 && t.is_finite() && x.is_finite() => Some((t, x)),
                                        (Some(_), Some(_)) => {
                                            c.fail(&f, "need t > 0 and x > 0");
                                            None
                                        }
                                        _ => None,
                                    }
                                }
                                _ => {
                                    c.fail(&f, "expected a pair [t, x]");
                                    None
                                }
                            }
                        })
                        .collect();
                    (c.problems.len() == before).then_some(pts)
                }
                Some(_) => {
                    c.fail("schedule", "expected a non-empty list of [t, x] pairs");
                    None
                }
            };
            let n_samples = c.integer(obj, "n_samples", true);
            if n_samples == Some(0) {
                c.fail("n_samples", "must be at least 1");
            }
            let methods = match obj.get("methods") {
                None => Some(vec![rrmd::montecarlo::Method::Tilted]),
                Some(Value::Array(items)) if !items.is_empty() => {
                    let ms: Vec<_> = items
                        .iter()
                        .filter_map(|m| match m.as_str() {
                            Some("naive") => Some(rrmd::montecarlo::Method::Naive),
                            Some("tilted") => Some(rrmd::montecarlo::Method::Tilted),
                            _ => None,
                        })
                        .collect();
                    if ms.len() == items.len() {
                        Some(ms)
                    } else {
                        c.fail("methods", "entries must be \"naive\" or \"tilted\"");
                        None
                    }
                }
                Some(_) => {
                    c.fail("methods", "expected a non-empty list");
                    None
                }
            };
            let tracking_z = threshold(&mut c, "tracking_z");
            let trend = match thresholds.get("trend") {
                None => false,
                Some(Value::Bool(b)) => *b,
                Some(_) => {
                    c.fail("thresholds.trend", "expected a boolean");
                    false
                }
            };
            let n_samples = n_samples.filter(|n| *n > 0);
            Some(Params::Mdp { schedule: schedule?, n_samples: n_samples?, methods: methods?, tracking_z, trend })
        }
    });

    if !c.problems.is_empty() {
        return Err(ConfigError { problems: c.problems });
    }
    Ok(RunConfig {
        command: command.expect("validated"),
        law_path,
        law: law.expect("validated"),
        standardize,
        seed: seed.unwrap_or(0),
        params: params.expect("validated"),
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAW: &str = r#"{"kind":"discrete","atoms":[{"tau":"1","x":-1.0,"p":0.5},{"tau":"1","x":1.0,"p":0.5}]}"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, Path::new("."))
    }

    fn with_law(body: &str) -> String {
        format!(r#"{{"law": {LAW}, {body}}}"#)
    }

    #[test]
    fn range_grid() {
        let cfg = parse(&with_law(r#""command":"eta","lambda":{"start":-1,"stop":1,"step":0.1}"#)).unwrap();
        match cfg.params {
            Params::Eta { lambda, .. } => {
                assert_eq!(lambda.len(), 21);
                assert_eq!(lambda[0], -1.0);
                assert!((lambda[20] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn rational_grid_entries() {
        let cfg = parse(&with_law(r#""command":"mgf","lambda":["1/2", -1],"t":[0, "3/2"]"#)).unwrap();
        assert_eq!(cfg.params, Params::Mgf { lambda: vec![0.5, -1.0], t: vec![0.0, 1.5], max_relative_gap: None });
        let err = parse(&with_law(r#""command":"mgf","lambda":["1//2"],"t":[1]"#)).unwrap_err();
        assert_eq!(err.problems[0].field, "lambda[0]");
        assert!(err.problems[0].message.contains("malformed rational"));
    }

    #[test]
    fn mdp_needs_a_seed() {
        let err = parse(&with_law(r#""command":"mdp","schedule":[[400,2]],"n_samples":10"#)).unwrap_err();
        assert_eq!(err.problems.len(), 1);
        assert_eq!(err.problems[0].field, "seed");
    }

    #[test]
    fn every_problem_is_listed() {
        let err = parse(r#"{"command":"mdp","schedule":[[400]],"n_samples":0,"colour":1,"thresholds":{"max_gap":1}}"#).unwrap_err();
        let fields: Vec<&str> = err.problems.iter().map(|p| p.field.as_str()).collect();
        for f in ["law", "seed", "schedule[0]", "n_samples", "colour", "thresholds.max_gap"] {
            assert!(fields.contains(&f), "{f} not in {fields:?}");
        }
    }

    #[test]
    fn unknown_command_and_missing_law_file() {
        let err = parse(r#"{"command":"plot","law":"no/such/law.json"}"#).unwrap_err();
        assert_eq!(err.problems.len(), 2);
        assert!(err.problems[0].message.contains("unknown command"));
        assert!(err.problems[1].message.contains("cannot read law file"));
    }

    #[test]
    fn identity_check_defaults_its_threshold() {
        let cfg = parse(&with_law(r#""command":"identity-check","lambda":[1],"t":[1]"#)).unwrap();
        assert!(matches!(cfg.params, Params::Mgf { max_relative_gap: Some(g), .. } if g == IDENTITY_GAP));
    }

    #[test]
    fn seed_override_updates_the_embedded_config() {
        let mut cfg = parse(&with_law(r#""command":"eta","lambda":[1],"seed":3"#)).unwrap();
        assert_eq!(cfg.seed, 3);
        cfg.set_seed(9);
        assert_eq!(cfg.raw["seed"], 9);
    }
}
