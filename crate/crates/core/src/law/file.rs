//! JSON law specification files.
//!
//! ```text
//! {"kind":"discrete","atoms":[{"tau":"3/2","x":-1.0,"p":0.5}, ...]}
//! {"kind":"parametric","family":"scaled-sqrt",
//!  "params":{"tau":{"law":"exponential","rate":1.0},"a":1.0,"b":0.0}}
//! ```
//!
//! `tau` is always a rational string. Named τ-laws: `exponential {rate}`,
//! `gamma {shape, scale}`, `uniform {lo, hi}`.

use serde::{Deserialize, Serialize};

use super::{
    format_rational, parse_rational, Atom, JointLaw, LawError, ParametricLaw, PositiveLaw, ScaledSqrt,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LawSpec {
    Discrete { atoms: Vec<AtomSpec> },
    Parametric { family: String, params: serde_json::Value },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomSpec {
    tau: String,
    x: f64,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaledSqrtParams {
    tau: TauLawSpec,
    a: f64,
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
enum TauLawSpec {
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl From<TauLawSpec> for PositiveLaw {
    fn from(s: TauLawSpec) -> Self {
        match s {
            TauLawSpec::Exponential { rate } => PositiveLaw::Exponential { rate },
            TauLawSpec::Gamma { shape, scale } => PositiveLaw::Gamma { shape, scale },
            TauLawSpec::Uniform { lo, hi } => PositiveLaw::Uniform { lo, hi },
        }
    }
}

impl From<PositiveLaw> for TauLawSpec {
    fn from(l: PositiveLaw) -> Self {
        match l {
            PositiveLaw::Exponential { rate } => TauLawSpec::Exponential { rate },
            PositiveLaw::Gamma { shape, scale } => TauLawSpec::Gamma { shape, scale },
            PositiveLaw::Uniform { lo, hi } => TauLawSpec::Uniform { lo, hi },
        }
    }
}

/// Parses and validates a law specification.
pub fn parse_law(text: &str) -> Result<JointLaw, LawError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LawError::Schema(e.to_string()))?;
    law_from_value(&value)
}

pub fn law_from_value(value: &serde_json::Value) -> Result<JointLaw, LawError> {
    let spec: LawSpec = serde_json::from_value(value.clone()).map_err(|e| LawError::Schema(e.to_string()))?;
    match spec {
        LawSpec::Discrete { atoms } => {
            let atoms = atoms
                .into_iter()
                .map(|a| Ok(Atom::new(parse_rational(&a.tau)?, a.x, a.p)))
                .collect::<Result<Vec<_>, LawError>>()?;
            JointLaw::discrete(atoms)
        }
        LawSpec::Parametric { family, params } => match family.as_str() {
            "scaled-sqrt" => {
                let p: ScaledSqrtParams =
                    serde_json::from_value(params).map_err(|e| LawError::Schema(e.to_string()))?;
                JointLaw::scaled_sqrt(p.tau.into(), p.a, p.b)
            }
            "custom-sampler" => Err(LawError::Schema(
                "custom-sampler laws carry a closure and can only be built in code".into(),
            )),
            other => Err(LawError::Schema(format!("unknown parametric family {other:?}"))),
        },
    }
}

/// JSON value of a law; custom samplers have no file representation.
pub fn law_to_value(law: &JointLaw) -> Result<serde_json::Value, LawError> {
    let spec = match law {
        JointLaw::Discrete(d) => LawSpec::Discrete {
            atoms: d
                .atoms()
                .iter()
                .map(|a| AtomSpec { tau: format_rational(&a.tau), x: a.x, p: a.p })
                .collect(),
        },
        JointLaw::Parametric(ParametricLaw::ScaledSqrt(ScaledSqrt { tau, a, b })) => LawSpec::Parametric {
            family: "scaled-sqrt".into(),
            params: serde_json::to_value(ScaledSqrtParams { tau: (*tau).into(), a: *a, b: *b })
                .expect("plain struct"),
        },
        JointLaw::Parametric(ParametricLaw::Custom(_)) => {
            return Err(LawError::Schema("custom-sampler laws cannot be serialized".into()))
        }
    };
    Ok(serde_json::to_value(spec).expect("plain enum"))
}
