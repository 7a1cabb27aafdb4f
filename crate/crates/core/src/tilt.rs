//! Exponential tilting of the pair (τ, X).
//!
//! For fixed λ the map η ↦ ψ(λ, η) = E exp(λX − ητ) is strictly decreasing
//! and log-convex. When E X = 0 and X is not degenerate, ψ(λ, 0) > 1 for
//! λ ≠ 0 and the equation ψ(λ, η) = 1 has exactly one root η_λ > 0. The
//! tilted pair law carries weights p·e^{λx − η_λτ}; its τ-marginal is μ_λ.
//!
//! Conditioning on N(t) = n, the first n pairs are tilted and the straddling
//! pair only has to satisfy τ_{n+1} > t − T_n; its reward is not part of
//! S(t). Hence E e^{λS(t)} = e^{η_λ t}(U_λ * h_λ)(t) with
//! h_λ(t) = e^{−η_λ t} P(τ > t), the tail of the untilted τ.

use rayon::prelude::*;
use thiserror::Error;

use crate::law::{
    validate, ContinuousTau, DiscreteLaw, DiscreteMeasure, JointLaw, LawError, ParametricLaw, PositiveLaw,
    Rational, ScaledSqrt,
};
use crate::law::rational::to_f64;
use crate::numeric::{compensated_sum, CompensatedSum};

/// Default tolerance on |ψ(λ, η) − 1|.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_ITER: usize = 200;
const MAX_BRACKET: f64 = 1e300;
/// Largest |λ| tried when solving the drift equation.
const MAX_DRIFT_LAMBDA: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TiltError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("{0}: no tilting evaluator for this law")]
    Unsupported(String),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("λ must be finite, got {0}")]
    NonFiniteLambda(f64),
    #[error("λ = {lambda}: ψ(λ, 0) = {psi_at_zero} ≤ 1, so there is no root η > 0 (is E X = 0?)")]
    NoRoot { lambda: f64, psi_at_zero: f64 },
    #[error("λ = {lambda}: root finder stopped after {iterations} iterations with |ψ − 1| = {residual:e}")]
    NotConverged { lambda: f64, iterations: usize, residual: f64 },
    #[error("drift {target} is outside the achievable range (|λ| = {max_lambda} reaches only {reached})")]
    DriftOutOfRange { target: f64, max_lambda: f64, reached: f64 },
}

/// Evaluates ln ψ and the tilted mean of τ for one law.
enum Evaluator<'a> {
    Discrete { law: &'a DiscreteLaw, total: f64 },
    ScaledSqrt(&'a ScaledSqrt),
}

impl<'a> Evaluator<'a> {
    fn new(law: &'a JointLaw) -> Result<Self, TiltError> {
        match law {
            JointLaw::Discrete(d) => {
                let total = compensated_sum(d.atoms().iter().map(|a| a.p));
                Ok(Evaluator::Discrete { law: d, total })
            }
            JointLaw::Parametric(ParametricLaw::ScaledSqrt(s)) => Ok(Evaluator::ScaledSqrt(s)),
            JointLaw::Parametric(ParametricLaw::Custom(c)) => Err(TiltError::Unsupported(c.name.clone())),
        }
    }

    /// `(ln ψ(λ, η), E_q τ)` where `E_q τ = −∂_η ln ψ`.
    fn eval(&self, lambda: f64, eta: f64) -> (f64, f64) {
        match self {
            Evaluator::Discrete { law, total } => discrete_ln_psi(law, *total, lambda, eta),
            Evaluator::ScaledSqrt(s) => {
                let psi = s.weighted_expectation(lambda, eta, 0.0, |_, _| 1.0);
                let tau = s.weighted_expectation(lambda, eta, 0.0, |tau, _| tau);
                (psi.ln(), tau / psi)
            }
        }
    }

    fn ln_psi(&self, lambda: f64, eta: f64) -> f64 {
        match self {
            Evaluator::Discrete { law, total } => discrete_ln_psi(law, *total, lambda, eta).0,
            Evaluator::ScaledSqrt(s) => s.weighted_expectation(lambda, eta, 0.0, |_, _| 1.0).ln(),
        }
    }
}

fn discrete_ln_psi(law: &DiscreteLaw, total: f64, lambda: f64, eta: f64) -> (f64, f64) {
    let taus = law.tau_f64();
    let atoms = law.atoms();
    let exponent = |i: usize| lambda * atoms[i].x - eta * taus[i];
    let live = || (0..atoms.len()).filter(|&i| atoms[i].p > 0.0);
    let small = live().all(|i| exponent(i).abs() < 1.0);
    // Near the origin ψ − 1 is a sum of small terms; expm1 keeps them exact.
    let shift = if small { 0.0 } else { live().map(exponent).fold(f64::NEG_INFINITY, f64::max) };
    let mut w = CompensatedSum::new();
    let mut wt = CompensatedSum::new();
    let mut dev = CompensatedSum::new();
    for i in live() {
        let u = exponent(i);
        let e = (u - shift).exp();
        w.add(atoms[i].p * e);
        wt.add(atoms[i].p * taus[i] * e);
        if small {
            dev.add(atoms[i].p * u.exp_m1());
        }
    }
    let ln_psi = if small {
        // ψ of the normalized law: Σp e^u / Σp = 1 + Σp (e^u − 1) / Σp.
        (dev.value() / total).ln_1p()
    } else {
        shift + (w.value() / total).ln()
    };
    (ln_psi, wt.value() / w.value())
}

/// ψ(λ, η) = E exp(λX − ητ).
pub fn psi(law: &JointLaw, lambda: f64, eta: f64) -> Result<f64, TiltError> {
    Ok(ln_psi(law, lambda, eta)?.exp())
}

/// ln ψ(λ, η), evaluated in log space for discrete laws.
pub fn ln_psi(law: &JointLaw, lambda: f64, eta: f64) -> Result<f64, TiltError> {
    Ok(Evaluator::new(law)?.ln_psi(lambda, eta))
}

/// ψ(λ, η) − 1 without cancellation near the origin.
pub fn psi_minus_one(law: &JointLaw, lambda: f64, eta: f64) -> Result<f64, TiltError> {
    Ok(ln_psi(law, lambda, eta)?.exp_m1())
}

/// Tilted version of a law.
#[derive(Debug, Clone, PartialEq)]
pub enum TiltedLaw {
    /// Atoms reweighted to q = p·e^{λx − ητ}, the τ-marginal μ_λ, and the
    /// untilted τ-marginal μ.
    Discrete { pair: DiscreteLaw, tau_marginal: DiscreteMeasure, base_marginal: DiscreteMeasure },
    /// Continuous family; the tilt is applied inside every expectation.
    ScaledSqrt(TiltedScaledSqrt),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltResult {
    pub lambda: f64,
    pub eta: f64,
    /// ψ(λ, η) − 1 at the returned root.
    pub residual: f64,
    pub tilted: TiltedLaw,
}

impl TiltResult {
    /// μ_λ for discrete laws.
    pub fn tau_marginal(&self) -> Option<&DiscreteMeasure> {
        match &self.tilted {
            TiltedLaw::Discrete { tau_marginal, .. } => Some(tau_marginal),
            TiltedLaw::ScaledSqrt(_) => None,
        }
    }

    /// Tilted weights q_i, in atom order, for discrete laws.
    pub fn weights(&self) -> Option<Vec<f64>> {
        match &self.tilted {
            TiltedLaw::Discrete { pair, .. } => Some(pair.atoms().iter().map(|a| a.p).collect()),
            TiltedLaw::ScaledSqrt(_) => None,
        }
    }
}

/// τ-marginal of a tilted scaled-sqrt law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedScaledSqrt {
    pub base: ScaledSqrt,
    pub lambda: f64,
    pub eta: f64,
    psi: f64,
}

impl TiltedScaledSqrt {
    /// μ_λ((t, ∞)).
    pub fn tail(&self, t: f64) -> f64 {
        self.base.weighted_expectation(self.lambda, self.eta, t, |_, _| 1.0) / self.psi
    }

    /// E_λ[g(τ, X)].
    pub fn expectation<G: Fn(f64, f64) -> f64>(&self, g: G) -> f64 {
        self.base.weighted_expectation(self.lambda, self.eta, 0.0, g) / self.psi
    }
}

impl ContinuousTau for TiltedScaledSqrt {
    fn cdf(&self, t: f64) -> Option<f64> {
        Some((1.0 - self.tail(t)).clamp(0.0, 1.0))
    }

    fn mean(&self) -> f64 {
        self.expectation(|tau, _| tau)
    }
}

/// Solves ψ(λ, η) = 1 for η ≥ 0 to |ψ − 1| ≤ `tol`.
///
/// The root is bracketed by doubling η from 1, then refined by Newton steps
/// from the left (monotone for a convex decreasing ln ψ) with bisection as
/// the fallback whenever a step leaves the bracket.
pub fn solve_eta(law: &JointLaw, lambda: f64, tol: f64) -> Result<TiltResult, TiltError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(TiltError::InvalidTolerance(tol));
    }
    if !lambda.is_finite() {
        return Err(TiltError::NonFiniteLambda(lambda));
    }
    let ev = Evaluator::new(law)?;
    let (eta, g) = if lambda == 0.0 { (0.0, 0.0) } else { find_root(&ev, lambda, tol)? };
    let tilted = match (&ev, law) {
        (Evaluator::Discrete { law: d, .. }, _) => tilt_atoms(d, lambda, eta),
        (Evaluator::ScaledSqrt(s), _) => TiltedLaw::ScaledSqrt(TiltedScaledSqrt {
            base: **s,
            lambda,
            eta,
            psi: g.exp(),
        }),
    };
    Ok(TiltResult { lambda, eta, residual: g.exp_m1(), tilted })
}

fn find_root(ev: &Evaluator<'_>, lambda: f64, tol: f64) -> Result<(f64, f64), TiltError> {
    let (g0, _) = ev.eval(lambda, 0.0);
    if !(g0 > 0.0) {
        return Err(TiltError::NoRoot { lambda, psi_at_zero: g0.exp() });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let g = ev.ln_psi(lambda, hi);
        if g < 0.0 {
            break;
        }
        if g == 0.0 {
            return Ok((hi, g));
        }
        lo = hi;
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(TiltError::NotConverged { lambda, iterations: 0, residual: g.exp_m1() });
        }
    }
    let mut eta = lo;
    let mut last = (f64::NAN, f64::INFINITY);
    for _ in 0..MAX_ITER {
        let (g, mean_tau) = ev.eval(lambda, eta);
        if g.exp_m1().abs() <= tol {
            // One more Newton step usually lands within an ulp of the root.
            let polished = eta + g / mean_tau;
            if polished >= 0.0 {
                let gp = ev.ln_psi(lambda, polished);
                if gp.abs() <= g.abs() {
                    return Ok((polished, gp));
                }
            }
            return Ok((eta, g));
        }
        last = (eta, g);
        if g > 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        let step = eta + g / mean_tau;
        eta = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    Err(TiltError::NotConverged { lambda, iterations: MAX_ITER, residual: last.1.exp_m1() })
}

fn tilt_atoms(law: &DiscreteLaw, lambda: f64, eta: f64) -> TiltedLaw {
    let taus = law.tau_f64();
    let exps: Vec<f64> = law
        .atoms()
        .iter()
        .zip(taus)
        .map(|(a, &t)| if a.p > 0.0 { a.p.ln() + lambda * a.x - eta * t } else { f64::NEG_INFINITY })
        .collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
    let total = compensated_sum(raw.iter().copied());
    let atoms = law
        .atoms()
        .iter()
        .zip(&raw)
        .map(|(a, w)| crate::law::Atom::new(a.tau.clone(), a.x, w / total))
        .collect();
    let pair = DiscreteLaw::new_unchecked(atoms);
    let merged = pair.tau_marginal();
    let mass = merged.total_mass();
    let tau_marginal = DiscreteMeasure::from_points(merged.points().iter().map(|(t, m)| (t.clone(), m / mass)));
    let base = law.tau_marginal();
    let base_mass = base.total_mass();
    let base_marginal = DiscreteMeasure::from_points(base.points().iter().map(|(t, m)| (t.clone(), m / base_mass)));
    TiltedLaw::Discrete { pair, tau_marginal, base_marginal }
}

/// The tilted pair as a law in its own right (discrete laws only).
pub fn tilted_pair_law(tilt: &TiltResult) -> Result<JointLaw, TiltError> {
    match &tilt.tilted {
        TiltedLaw::Discrete { pair, .. } => Ok(JointLaw::Discrete(pair.clone())),
        TiltedLaw::ScaledSqrt(_) => Err(TiltError::Unsupported(
            "tilted scaled-sqrt law (only its expectations are available)".into(),
        )),
    }
}

/// h_λ(t) = e^{−η_λ t} P(τ > t).
#[derive(Debug, Clone, PartialEq)]
pub enum HFunction {
    /// Values at kδ, k = 0..len. Between grid points P(τ > t) is constant.
    Lattice { lambda: f64, eta: f64, delta: Rational, tails: Vec<f64>, values: Vec<f64> },
    General { lambda: f64, eta: f64, tau: PositiveLaw },
}

impl HFunction {
    pub fn lambda(&self) -> f64 {
        match self {
            HFunction::Lattice { lambda, .. } | HFunction::General { lambda, .. } => *lambda,
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            HFunction::Lattice { eta, .. } | HFunction::General { eta, .. } => *eta,
        }
    }

    /// Grid values h_λ(kδ) for lattice laws.
    pub fn lattice_values(&self) -> Option<&[f64]> {
        match self {
            HFunction::Lattice { values, .. } => Some(values),
            HFunction::General { .. } => None,
        }
    }

    /// h_λ(t) for t ≥ 0. Lattice values beyond the stored range are zero
    /// only if the support ends inside it; callers size the grid accordingly.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            HFunction::Lattice { eta, delta, tails, .. } => {
                let k = (t / to_f64(delta)).floor() as usize;
                let tail = tails.get(k).copied().unwrap_or(0.0);
                (-eta * t).exp() * tail
            }
            HFunction::General { eta, tau, .. } => (-eta * t).exp() * (1.0 - tau.cdf(t)),
        }
    }
}

/// h_λ on the lattice {0, δ, …, (len−1)δ} of the law's span, or as a
/// pointwise evaluator for continuous laws.
pub fn h_function(tilt: &TiltResult, len: usize) -> Result<HFunction, TiltError> {
    match &tilt.tilted {
        TiltedLaw::Discrete { base_marginal, .. } => {
            let delta = base_marginal.span();
            let lattice = base_marginal.to_lattice(&delta)?;
            let mut tails = lattice.tail_masses();
            // τ has no atom at 0, so tails[0] = 1 up to rounding.
            let total = tails[0];
            tails.iter_mut().for_each(|t| *t /= total);
            tails.resize(len.max(tails.len()), 0.0);
            tails.truncate(len.max(1));
            let d = to_f64(&delta);
            let values = tails
                .iter()
                .enumerate()
                .map(|(k, tail)| (-tilt.eta * k as f64 * d).exp() * tail)
                .collect();
            Ok(HFunction::Lattice { lambda: tilt.lambda, eta: tilt.eta, delta, tails, values })
        }
        TiltedLaw::ScaledSqrt(t) => Ok(HFunction::General { lambda: tilt.lambda, eta: tilt.eta, tau: t.base.tau }),
    }
}

/// E_λ X / E_λ τ, which equals dη_λ/dλ.
pub fn tilted_drift(tilt: &TiltResult) -> f64 {
    match &tilt.tilted {
        TiltedLaw::Discrete { pair, .. } => {
            let x = compensated_sum(pair.atoms().iter().map(|a| a.p * a.x));
            let tau = compensated_sum(pair.atoms().iter().zip(pair.tau_f64()).map(|(a, t)| a.p * t));
            x / tau
        }
        TiltedLaw::ScaledSqrt(t) => t.expectation(|_, x| x) / t.expectation(|tau, _| tau),
    }
}

/// One row of an η-curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPoint {
    pub tilt: TiltResult,
    /// η_λ / (λ²/2); at λ = 0 the limit E X² / E τ.
    pub ratio: f64,
    pub drift: f64,
}

/// η_λ, η_λ/(λ²/2) and the tilted drift along a λ-grid.
pub fn eta_curve(law: &JointLaw, lambdas: &[f64], tol: f64) -> Result<Vec<EtaPoint>, TiltError> {
    let report = validate(law)?;
    let limit = report.mean_x2 / report.mean_tau;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let tilt = solve_eta(law, lambda, tol)?;
            let ratio = if lambda == 0.0 { limit } else { tilt.eta / (0.5 * lambda * lambda) };
            let drift = tilted_drift(&tilt);
            Ok(EtaPoint { tilt, ratio, drift })
        })
        .collect()
}

/// Rows (λ, (ψ(λ, aλ²) − 1)/λ²) for the nonzero λ of the grid. For a
/// standardized law the values tend to ½ − a.
pub fn small_lambda_limit_check(law: &JointLaw, a: f64, lambdas: &[f64]) -> Result<Vec<(f64, f64)>, TiltError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(TiltError::Law(LawError::InvalidParameter {
            family: "small-λ check".into(),
            message: format!("a must be positive, got {a}"),
        }));
    }
    let ev = Evaluator::new(law)?;
    Ok(lambdas
        .iter()
        .filter(|&&l| l != 0.0)
        .map(|&l| (l, ev.ln_psi(l, a * l * l).exp_m1() / (l * l)))
        .collect())
}

/// Tilt whose drift E_λ X / E_λ τ equals `target`, found by bisection on the
/// nondecreasing map λ ↦ drift.
pub fn tilt_for_drift(law: &JointLaw, target: f64, tol: f64) -> Result<TiltResult, TiltError> {
    if target == 0.0 {
        return solve_eta(law, 0.0, tol);
    }
    let sign = target.signum();
    let goal = target.abs();
    let drift_at = |l: f64| -> Result<(TiltResult, f64), TiltError> {
        let t = solve_eta(law, l, tol)?;
        let d = tilted_drift(&t) * sign;
        Ok((t, d))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let (_, d) = drift_at(sign * hi)?;
        if d >= goal {
            break;
        }
        if hi >= MAX_DRIFT_LAMBDA {
            return Err(TiltError::DriftOutOfRange { target, max_lambda: hi, reached: d * sign });
        }
        lo = hi;
        hi = (hi * 2.0).min(MAX_DRIFT_LAMBDA);
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (_, d) = drift_at(sign * mid)?;
        if d < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (lo_t, lo_d) = drift_at(sign * lo)?;
    let (hi_t, hi_d) = drift_at(sign * hi)?;
    Ok(if (goal - lo_d).abs() <= (hi_d - goal).abs() { lo_t } else { hi_t })
}
