//! Joint laws of the inter-arrival/reward pair (τ, X).
//!
//! Discrete laws keep τ-locations as exact rationals so that the span, and
//! with it the lattice/nonlattice dispatch, is computed exactly. Moments of
//! discrete laws are computed in exact rational arithmetic (every `f64` is a
//! dyadic rational) and rounded once at the end.

pub mod catalog;
pub mod file;
pub mod marginal;
pub mod parametric;
pub mod rational;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

pub use marginal::{DiscreteMeasure, LatticeMeasure};
pub use parametric::{ContinuousTau, CustomFamily, ParametricLaw, PositiveLaw, ScaledSqrt};
pub use rational::{format_rational, parse_rational, Rational};

use rational::{from_f64_exact, lattice_index, rational_gcd, to_f64};

/// Tolerance for Σp = 1 and for the standardization moments.
pub const MOMENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("law has no atoms")]
    Empty,
    #[error("atom {index}: τ = {tau} is not positive")]
    NonPositiveTau { index: usize, tau: String },
    #[error("atom {index}: probability {p} is negative or not finite")]
    NegativeProbability { index: usize, p: f64 },
    #[error("atom {index}: {field} is not finite")]
    NonFinite { index: usize, field: &'static str },
    #[error("probabilities sum to {sum}, not 1")]
    ProbabilitySum { sum: f64 },
    #[error("reward has zero variance")]
    DegenerateReward,
    #[error("malformed rational {0:?}")]
    MalformedRational(String),
    #[error("{family}: {message}")]
    InvalidParameter { family: String, message: String },
    #[error("point {point} is not on the lattice with step {delta}")]
    NotOnLattice { delta: String, point: String },
    #[error("operation needs a discrete law")]
    NotDiscrete,
    #[error("law file: {0}")]
    Schema(String),
}

/// One atom of a discrete joint law.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub tau: Rational,
    pub x: f64,
    pub p: f64,
}

impl Atom {
    pub fn new(tau: Rational, x: f64, p: f64) -> Self {
        Self { tau, x, p }
    }

    /// Atom with an integer τ.
    pub fn int(tau: i64, x: f64, p: f64) -> Self {
        Self::new(Rational::from_integer(tau.into()), x, p)
    }
}

/// Finitely supported joint law of (τ, X).
#[derive(Debug, Clone)]
pub struct DiscreteLaw {
    atoms: Vec<Atom>,
    tau_f64: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PartialEq for DiscreteLaw {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

fn check_atoms(atoms: &[Atom]) -> Result<(), LawError> {
    if atoms.is_empty() {
        return Err(LawError::Empty);
    }
    for (index, a) in atoms.iter().enumerate() {
        if !a.tau.is_positive() {
            return Err(LawError::NonPositiveTau { index, tau: format_rational(&a.tau) });
        }
        if !a.x.is_finite() {
            return Err(LawError::NonFinite { index, field: "x" });
        }
        if !a.p.is_finite() || a.p < 0.0 {
            return Err(LawError::NegativeProbability { index, p: a.p });
        }
    }
    let sum = exact_sum(atoms.iter().map(|a| from_f64_exact(a.p)));
    let sum_f = to_f64(&sum);
    if (sum_f - 1.0).abs() > MOMENT_TOL {
        return Err(LawError::ProbabilitySum { sum: sum_f });
    }
    Ok(())
}

fn exact_sum<I: IntoIterator<Item = BigRational>>(terms: I) -> BigRational {
    terms.into_iter().fold(BigRational::zero(), |acc, t| acc + t)
}

impl DiscreteLaw {
    /// Validated construction: τ > 0, p ≥ 0, x finite, |Σp − 1| ≤ 1e−12.
    pub fn new(atoms: Vec<Atom>) -> Result<Self, LawError> {
        check_atoms(&atoms)?;
        Ok(Self::new_unchecked(atoms))
    }

    /// Construction without semantic checks; [`validate`] reports problems.
    pub fn new_unchecked(atoms: Vec<Atom>) -> Self {
        let tau_f64 = atoms.iter().map(|a| to_f64(&a.tau)).collect();
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.p.max(0.0);
            cumulative.push(acc);
        }
        Self { atoms, tau_f64, cumulative }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tau_f64(&self) -> &[f64] {
        &self.tau_f64
    }

    /// τ-marginal μ.
    pub fn tau_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_points(self.atoms.iter().map(|a| (a.tau.clone(), a.p)))
    }

    /// Span of μ: the gcd of the τ-locations carrying positive mass.
    pub fn span(&self) -> Rational {
        self.atoms
            .iter()
            .filter(|a| a.p > 0.0)
            .fold(Rational::zero(), |g, a| rational_gcd(&g, &a.tau))
    }

    /// τ-locations as integer multiples of `delta`.
    pub fn lattice_indices(&self, delta: &Rational) -> Result<Vec<u64>, LawError> {
        self.atoms
            .iter()
            .map(|a| {
                lattice_index(&a.tau, delta).ok_or_else(|| LawError::NotOnLattice {
                    delta: format_rational(delta),
                    point: format_rational(&a.tau),
                })
            })
            .collect()
    }

    /// Index of the atom selected by a uniform draw `u ∈ [0, 1)`.
    #[inline]
    pub fn atom_index_for(&self, u: f64) -> usize {
        let total = *self.cumulative.last().expect("non-empty law");
        let target = u * total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.atoms.len() - 1)
    }

    fn exact_moments(&self) -> ExactMoments {
        let mut total = BigRational::zero();
        let mut tau = BigRational::zero();
        let mut x = BigRational::zero();
        let mut x2 = BigRational::zero();
        for a in &self.atoms {
            let p = from_f64_exact(a.p);
            let xv = from_f64_exact(a.x);
            tau += &p * &a.tau;
            x += &p * &xv;
            x2 += &p * &xv * &xv;
            total += p;
        }
        ExactMoments { mean_tau: tau / &total, mean_x: x / &total, mean_x2: x2 / &total }
    }
}

struct ExactMoments {
    mean_tau: BigRational,
    mean_x: BigRational,
    mean_x2: BigRational,
}

/// Joint law of (τ, X).
#[derive(Debug, Clone, PartialEq)]
pub enum JointLaw {
    Discrete(DiscreteLaw),
    Parametric(ParametricLaw),
}

impl JointLaw {
    pub fn discrete(atoms: Vec<Atom>) -> Result<Self, LawError> {
        DiscreteLaw::new(atoms).map(JointLaw::Discrete)
    }

    pub fn scaled_sqrt(tau: PositiveLaw, a: f64, b: f64) -> Result<Self, LawError> {
        let law = ScaledSqrt { tau, a, b };
        law.check()?;
        Ok(JointLaw::Parametric(ParametricLaw::ScaledSqrt(law)))
    }

    pub fn as_discrete(&self) -> Option<&DiscreteLaw> {
        match self {
            JointLaw::Discrete(d) => Some(d),
            JointLaw::Parametric(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            JointLaw::Discrete(_) => "discrete",
            JointLaw::Parametric(_) => "parametric",
        }
    }
}

/// Whether the integrability conditions behind the deviation results hold.
/// These are analytic facts, not sample statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConditionFlags {
    /// `E exp(εX² − τ) < ∞` for some ε > 0.
    pub square_exponential: bool,
    /// `E exp(λX − ετ) < ∞` for all λ and all ε > 0.
    pub tilted_exponential: bool,
    pub note: String,
}

impl ConditionFlags {
    fn finite_support() -> Self {
        Self {
            square_exponential: true,
            tilted_exponential: true,
            note: "finite support: every exponential moment is finite".into(),
        }
    }

    fn scaled_sqrt() -> Self {
        Self {
            square_exponential: true,
            tilted_exponential: true,
            note: "X = a√τ + b: εX² ≤ 2εa²τ + 2εb², so a small ε is dominated by the exponential \
                   factor in τ; the named τ-laws all have E e^{-ετ} < ∞ and exponential or bounded tails"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MomentReport {
    pub mean_tau: f64,
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_x2: f64,
    /// |E X| ≤ 1e−12, |E X² − 1| ≤ 1e−12 and |E τ − 1| ≤ 1e−12.
    pub standardized: bool,
    pub conditions: ConditionFlags,
}

impl MomentReport {
    fn from_moments(mean_tau: f64, mean_x: f64, mean_x2: f64, var_x: f64, conditions: ConditionFlags) -> Self {
        let standardized = mean_x.abs() <= MOMENT_TOL
            && (mean_x2 - 1.0).abs() <= MOMENT_TOL
            && (mean_tau - 1.0).abs() <= MOMENT_TOL;
        Self { mean_tau, mean_x, var_x, mean_x2, standardized, conditions }
    }
}

/// Moments of the law and whether it is standardized.
pub fn validate(law: &JointLaw) -> Result<MomentReport, LawError> {
    match law {
        JointLaw::Discrete(d) => {
            check_atoms(d.atoms())?;
            let m = d.exact_moments();
            let var = &m.mean_x2 - &m.mean_x * &m.mean_x;
            Ok(MomentReport::from_moments(
                to_f64(&m.mean_tau),
                to_f64(&m.mean_x),
                to_f64(&m.mean_x2),
                var.to_f64().unwrap_or(f64::NAN),
                ConditionFlags::finite_support(),
            ))
        }
        JointLaw::Parametric(ParametricLaw::ScaledSqrt(s)) => {
            s.check()?;
            Ok(MomentReport::from_moments(
                s.mean_tau(),
                s.mean_x(),
                s.mean_x2(),
                s.var_x(),
                ConditionFlags::scaled_sqrt(),
            ))
        }
        JointLaw::Parametric(ParametricLaw::Custom(c)) => {
            if !(c.mean_tau > 0.0 && c.mean_tau.is_finite()) {
                return Err(LawError::InvalidParameter {
                    family: c.name.clone(),
                    message: "declared E τ must be positive".into(),
                });
            }
            Ok(MomentReport::from_moments(
                c.mean_tau,
                c.mean_x,
                c.mean_x2,
                c.mean_x2 - c.mean_x * c.mean_x,
                c.conditions.clone(),
            ))
        }
    }
}

/// Rescales τ and applies an affine map to X so that E X = 0, E X² = 1 and
/// E τ = 1. τ is divided by the exact rational E τ for discrete laws.
pub fn standardize(law: &JointLaw) -> Result<JointLaw, LawError> {
    let report = validate(law)?;
    if report.standardized {
        return Ok(law.clone());
    }
    if report.var_x <= 0.0 {
        return Err(LawError::DegenerateReward);
    }
    match law {
        JointLaw::Discrete(d) => {
            let m = d.exact_moments();
            let sd = report.var_x.sqrt();
            let mean_x = report.mean_x;
            let atoms = d
                .atoms()
                .iter()
                .map(|a| Atom::new(&a.tau / &m.mean_tau, (a.x - mean_x) / sd, a.p))
                .collect();
            JointLaw::discrete(atoms)
        }
        JointLaw::Parametric(ParametricLaw::ScaledSqrt(s)) => {
            Ok(JointLaw::Parametric(ParametricLaw::ScaledSqrt(s.standardized()?)))
        }
        JointLaw::Parametric(ParametricLaw::Custom(c)) => {
            Ok(JointLaw::Parametric(ParametricLaw::Custom(c.standardized()?)))
        }
    }
}

/// Span of the τ-marginal; zero for continuous laws.
pub fn span(law: &JointLaw) -> Rational {
    match law {
        JointLaw::Discrete(d) => d.span(),
        JointLaw::Parametric(_) => Rational::zero(),
    }
}

/// One draw of (τ, X).
pub fn sample_pair<R: Rng>(law: &JointLaw, rng: &mut R) -> (f64, f64) {
    match law {
        JointLaw::Discrete(d) => {
            let i = d.atom_index_for(rng.random::<f64>());
            (d.tau_f64[i], d.atoms[i].x)
        }
        JointLaw::Parametric(ParametricLaw::ScaledSqrt(s)) => s.sample(rng),
        JointLaw::Parametric(ParametricLaw::Custom(c)) => (c.sampler)(rng),
    }
}
