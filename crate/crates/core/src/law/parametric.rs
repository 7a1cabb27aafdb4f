//! Continuous joint laws of (τ, X).
//!
//! The built-in family is `X = a√τ + b` with τ drawn from a named positive
//! law. Expectations of the form `E[g(τ, X) e^{λX − ητ}]` are computed by
//! adaptive quadrature in the variable `s = √τ`, which removes the square
//! root singularity at the origin.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Gamma};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::{ConditionFlags, LawError};
use crate::numeric::{integrate, integrate_to_infinity};

/// A τ-law with a CDF, used by the nonlattice renewal machinery.
pub trait ContinuousTau: Send + Sync {
    /// `P(τ ≤ t)`; `None` when no CDF evaluator exists.
    fn cdf(&self, t: f64) -> Option<f64>;

    /// `P(τ < t)`. Equal to [`cdf`](Self::cdf) for laws without atoms.
    fn cdf_left(&self, t: f64) -> Option<f64> {
        self.cdf(t)
    }

    fn mean(&self) -> f64;
}

/// Named positive law for τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositiveLaw {
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl PositiveLaw {
    pub fn name(&self) -> &'static str {
        match self {
            PositiveLaw::Exponential { .. } => "exponential",
            PositiveLaw::Gamma { .. } => "gamma",
            PositiveLaw::Uniform { .. } => "uniform",
        }
    }

    pub fn check(&self) -> Result<(), LawError> {
        let ok = match *self {
            PositiveLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            PositiveLaw::Gamma { shape, scale } => {
                shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            }
            PositiveLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo,
        };
        if ok {
            Ok(())
        } else {
            Err(LawError::InvalidParameter {
                family: self.name().into(),
                message: format!("invalid parameters {self:?}"),
            })
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PositiveLaw::Exponential { rate } => 1.0 / rate,
            PositiveLaw::Gamma { shape, scale } => shape * scale,
            PositiveLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// `E √τ` in closed form.
    pub fn mean_sqrt(&self) -> f64 {
        match *self {
            PositiveLaw::Exponential { rate } => 0.5 * (std::f64::consts::PI / rate).sqrt(),
            PositiveLaw::Gamma { shape, scale } => {
                scale.sqrt() * (ln_gamma(shape + 0.5) - ln_gamma(shape)).exp()
            }
            PositiveLaw::Uniform { lo, hi } => {
                2.0 / 3.0 * (hi.powf(1.5) - lo.powf(1.5)) / (hi - lo)
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            PositiveLaw::Exponential { rate } => -(-rate * t).exp_m1(),
            PositiveLaw::Gamma { shape, scale } => gamma_lr(shape, t / scale),
            PositiveLaw::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// Law of `c·τ`.
    pub fn scaled(&self, c: f64) -> PositiveLaw {
        match *self {
            PositiveLaw::Exponential { rate } => PositiveLaw::Exponential { rate: rate / c },
            PositiveLaw::Gamma { shape, scale } => PositiveLaw::Gamma { shape, scale: scale * c },
            PositiveLaw::Uniform { lo, hi } => PositiveLaw::Uniform { lo: lo * c, hi: hi * c },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PositiveLaw::Exponential { rate } => Exp::new(rate).expect("checked rate").sample(rng),
            PositiveLaw::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("checked parameters").sample(rng)
            }
            PositiveLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// `ln(2 s f(s²))`: log-density of `√τ` at `s`.
    fn ln_sqrt_density(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            PositiveLaw::Exponential { rate } => (2.0 * s).ln() + rate.ln() - rate * s * s,
            PositiveLaw::Gamma { shape, scale } => {
                std::f64::consts::LN_2 + (2.0 * shape - 1.0) * s.ln() - s * s / scale
                    - ln_gamma(shape)
                    - shape * scale.ln()
            }
            PositiveLaw::Uniform { lo, hi } => {
                if s * s < lo || s * s > hi {
                    f64::NEG_INFINITY
                } else {
                    (2.0 * s).ln() - (hi - lo).ln()
                }
            }
        }
    }

    /// Support of `√τ` as `[lo, hi]`, `hi = None` for unbounded.
    fn sqrt_support(&self) -> (f64, Option<f64>) {
        match *self {
            PositiveLaw::Uniform { lo, hi } => (lo.sqrt(), Some(hi.sqrt())),
            _ => (0.0, None),
        }
    }
}

impl ContinuousTau for PositiveLaw {
    fn cdf(&self, t: f64) -> Option<f64> {
        Some(PositiveLaw::cdf(self, t))
    }

    fn mean(&self) -> f64 {
        PositiveLaw::mean(self)
    }
}

const QUAD_ABS_TOL: f64 = 1e-15;
const QUAD_REL_TOL: f64 = 1e-13;

/// `X = a√τ + b`, τ from a named positive law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSqrt {
    pub tau: PositiveLaw,
    pub a: f64,
    pub b: f64,
}

impl ScaledSqrt {
    pub fn check(&self) -> Result<(), LawError> {
        self.tau.check()?;
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(LawError::InvalidParameter {
                family: "scaled-sqrt".into(),
                message: "a and b must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn mean_tau(&self) -> f64 {
        self.tau.mean()
    }

    pub fn mean_x(&self) -> f64 {
        self.a * self.tau.mean_sqrt() + self.b
    }

    pub fn mean_x2(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        a * a * self.tau.mean() + 2.0 * a * b * self.tau.mean_sqrt() + b * b
    }

    pub fn var_x(&self) -> f64 {
        let ms = self.tau.mean_sqrt();
        self.a * self.a * (self.tau.mean() - ms * ms)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let tau = self.tau.sample(rng);
        (tau, self.a * tau.sqrt() + self.b)
    }

    /// `E[g(τ, X) e^{λX − ητ}; τ > tail_from]` by quadrature in `s = √τ`.
    pub fn weighted_expectation<G>(&self, lambda: f64, eta: f64, tail_from: f64, g: G) -> f64
    where
        G: Fn(f64, f64) -> f64,
    {
        let (s_lo, s_hi) = self.tau.sqrt_support();
        let start = s_lo.max(tail_from.max(0.0).sqrt());
        let integrand = |s: f64| {
            let x = self.a * s + self.b;
            let log_w = self.tau.ln_sqrt_density(s) + lambda * x - eta * s * s;
            if log_w == f64::NEG_INFINITY {
                0.0
            } else {
                log_w.exp() * g(s * s, x)
            }
        };
        match s_hi {
            Some(hi) if start >= hi => 0.0,
            Some(hi) => integrate(integrand, start, hi, QUAD_ABS_TOL, QUAD_REL_TOL).value,
            None => integrate_to_infinity(integrand, start, QUAD_ABS_TOL, QUAD_REL_TOL).value,
        }
    }

    /// Affine map of X and rescaling of τ that produce E X = 0, E X² = 1, E τ = 1.
    pub fn standardized(&self) -> Result<ScaledSqrt, LawError> {
        let var = self.var_x();
        if var <= 0.0 {
            return Err(LawError::DegenerateReward);
        }
        let m = self.mean_tau();
        let sd = var.sqrt();
        // √τ = √m · √(τ/m)
        Ok(ScaledSqrt {
            tau: self.tau.scaled(1.0 / m),
            a: self.a * m.sqrt() / sd,
            b: (self.b - self.mean_x()) / sd,
        })
    }
}

/// User-supplied pair sampler with declared moments.
pub type PairSamplerFn = dyn Fn(&mut dyn RngCore) -> (f64, f64) + Send + Sync;

#[derive(Clone)]
pub struct CustomFamily {
    pub name: String,
    pub sampler: Arc<PairSamplerFn>,
    pub mean_tau: f64,
    pub mean_x: f64,
    pub mean_x2: f64,
    /// Hand-verified integrability conditions.
    pub conditions: ConditionFlags,
}

impl fmt::Debug for CustomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFamily")
            .field("name", &self.name)
            .field("mean_tau", &self.mean_tau)
            .field("mean_x", &self.mean_x)
            .field("mean_x2", &self.mean_x2)
            .finish_non_exhaustive()
    }
}

impl CustomFamily {
    pub fn standardized(&self) -> Result<CustomFamily, LawError> {
        let var = self.mean_x2 - self.mean_x * self.mean_x;
        if var <= 0.0 {
            return Err(LawError::DegenerateReward);
        }
        let (m, mu, sd) = (self.mean_tau, self.mean_x, var.sqrt());
        let inner = Arc::clone(&self.sampler);
        Ok(CustomFamily {
            name: format!("{} (standardized)", self.name),
            sampler: Arc::new(move |rng: &mut dyn RngCore| {
                let (tau, x) = inner(rng);
                (tau / m, (x - mu) / sd)
            }),
            mean_tau: 1.0,
            mean_x: 0.0,
            mean_x2: 1.0,
            conditions: self.conditions.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub enum ParametricLaw {
    ScaledSqrt(ScaledSqrt),
    Custom(CustomFamily),
}

impl PartialEq for ParametricLaw {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ParametricLaw::ScaledSqrt(a), ParametricLaw::ScaledSqrt(b)) => a == b,
            (ParametricLaw::Custom(a), ParametricLaw::Custom(b)) => Arc::ptr_eq(&a.sampler, &b.sampler),
            _ => false,
        }
    }
}

impl ParametricLaw {
    pub fn family_name(&self) -> &str {
        match self {
            ParametricLaw::ScaledSqrt(_) => "scaled-sqrt",
            ParametricLaw::Custom(c) => &c.name,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_to_infinity;

    #[test]
    fn closed_form_sqrt_means_match_quadrature() {
        let laws = [
            PositiveLaw::Exponential { rate: 1.7 },
            PositiveLaw::Gamma { shape: 2.5, scale: 0.4 },
            PositiveLaw::Gamma { shape: 0.7, scale: 1.3 },
            PositiveLaw::Uniform { lo: 1.0, hi: 4.0 },
        ];
        for law in laws {
            let law_x = ScaledSqrt { tau: law, a: 1.0, b: 0.0 };
            let ms = law_x.weighted_expectation(0.0, 0.0, 0.0, |_, x| x);
            let total = law_x.weighted_expectation(0.0, 0.0, 0.0, |_, _| 1.0);
            let mean = law_x.weighted_expectation(0.0, 0.0, 0.0, |t, _| t);
            assert!((total - 1.0).abs() < 1e-12, "{law:?}: {total}");
            assert!((ms - law.mean_sqrt()).abs() < 1e-12, "{law:?}: {ms}");
            assert!((mean - law.mean()).abs() < 1e-12, "{law:?}: {mean}");
        }
    }

    #[test]
    fn gamma_cdf_matches_density_integral() {
        let law = PositiveLaw::Gamma { shape: 2.0, scale: 0.5 };
        let t = 1.3;
        let tail = integrate_to_infinity(|s: f64| s / 0.25 * (-s / 0.5).exp(), t, 1e-15, 1e-13).value;
        assert!((law.cdf(t) - (1.0 - tail)).abs() < 1e-12);
    }

    #[test]
    fn standardization_of_scaled_sqrt() {
        let law = ScaledSqrt { tau: PositiveLaw::Exponential { rate: 2.0 }, a: 1.0, b: 0.0 };
        let s = law.standardized().unwrap();
        assert!((s.mean_tau() - 1.0).abs() < 1e-15);
        assert!(s.mean_x().abs() < 1e-14);
        assert!((s.mean_x2() - 1.0).abs() < 1e-14);
        let flat = ScaledSqrt { tau: PositiveLaw::Exponential { rate: 2.0 }, a: 0.0, b: 3.0 };
        assert!(matches!(flat.standardized(), Err(LawError::DegenerateReward)));
    }
}
