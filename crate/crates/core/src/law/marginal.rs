//! τ-marginals: finitely supported measures on rational points and their
//! lattice representation.

use num_traits::{Signed, Zero};

use super::rational::{lattice_index, rational_gcd, to_f64, Rational};
use super::LawError;
use crate::numeric::compensated_sum;

/// Probability measure on finitely many positive rational points, sorted by
/// location. Points with zero mass are dropped, so the stored points are
/// exactly the support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<(Rational, f64)>,
}

impl DiscreteMeasure {
    /// Merges repeated locations and drops zero masses.
    pub fn from_points<I: IntoIterator<Item = (Rational, f64)>>(points: I) -> Self {
        let mut pts: Vec<(Rational, f64)> = points.into_iter().filter(|(_, m)| *m > 0.0).collect();
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Rational, f64)> = Vec::with_capacity(pts.len());
        for (loc, mass) in pts {
            match merged.last_mut() {
                Some((last, m)) if *last == loc => *m += mass,
                _ => merged.push((loc, mass)),
            }
        }
        Self { points: merged }
    }

    pub fn points(&self) -> &[(Rational, f64)] {
        &self.points
    }

    pub fn support(&self) -> impl Iterator<Item = &Rational> {
        self.points.iter().map(|(t, _)| t)
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.points.iter().map(|(_, m)| *m))
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.points.iter().map(|(t, m)| to_f64(t) * m))
    }

    /// Largest δ with the whole mass on {δ, 2δ, …}.
    pub fn span(&self) -> Rational {
        self.points
            .iter()
            .fold(Rational::zero(), |g, (t, _)| rational_gcd(&g, t))
    }

    /// Masses on the grid {0, δ, 2δ, …}; every support point must be an
    /// integer multiple of `delta`.
    pub fn to_lattice(&self, delta: &Rational) -> Result<LatticeMeasure, LawError> {
        if !delta.is_positive() {
            return Err(LawError::NotOnLattice { delta: delta.to_string(), point: "-".into() });
        }
        let mut indexed = Vec::with_capacity(self.points.len());
        for (t, m) in &self.points {
            let k = lattice_index(t, delta).ok_or_else(|| LawError::NotOnLattice {
                delta: delta.to_string(),
                point: t.to_string(),
            })?;
            indexed.push((k as usize, *m));
        }
        let len = indexed.last().map_or(1, |(k, _)| k + 1);
        let mut masses = vec![0.0; len];
        for (k, m) in indexed {
            masses[k] += m;
        }
        LatticeMeasure::new(delta.clone(), masses)
    }
}

/// Measure on {0, δ, 2δ, …}; `masses[k] = μ({kδ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMeasure {
    delta: Rational,
    masses: Vec<f64>,
}

/// Tolerance on the total mass of a lattice measure.
pub const LATTICE_MASS_TOL: f64 = 1e-9;

impl LatticeMeasure {
    pub fn new(delta: Rational, masses: Vec<f64>) -> Result<Self, LawError> {
        if !delta.is_positive() {
            return Err(LawError::InvalidParameter {
                family: "lattice".into(),
                message: "span must be positive".into(),
            });
        }
        if let Some((index, &p)) = masses.iter().enumerate().find(|(_, m)| !m.is_finite() || **m < 0.0) {
            return Err(LawError::NegativeProbability { index, p });
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - 1.0).abs() > LATTICE_MASS_TOL {
            return Err(LawError::ProbabilitySum { sum: total });
        }
        if masses.first().is_some_and(|&m0| m0 >= 1.0) {
            return Err(LawError::InvalidParameter {
                family: "lattice".into(),
                message: "all mass at the origin".into(),
            });
        }
        Ok(Self { delta, masses })
    }

    /// Geometric law P(τ = kδ) = p(1−p)^{k−1}, k ≥ 1, with the tail beyond
    /// `k_max` lumped onto `k_max`.
    pub fn geometric(p: f64, delta: Rational, k_max: usize) -> Result<Self, LawError> {
        if !(p > 0.0 && p <= 1.0) || k_max == 0 {
            return Err(LawError::InvalidParameter {
                family: "geometric".into(),
                message: format!("need 0 < p <= 1 and k_max >= 1, got p={p}, k_max={k_max}"),
            });
        }
        let mut masses = vec![0.0; k_max + 1];
        let mut survival = 1.0;
        for mass in masses.iter_mut().take(k_max).skip(1) {
            *mass = survival * p;
            survival *= 1.0 - p;
        }
        masses[k_max] = survival;
        Self::new(delta, masses)
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn delta_f64(&self) -> f64 {
        to_f64(&self.delta)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// μ({kδ}), zero beyond the stored range.
    pub fn mass(&self, k: usize) -> f64 {
        self.masses.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.delta_f64() * compensated_sum(self.masses.iter().enumerate().map(|(k, m)| k as f64 * m))
    }

    /// `tail[k] = μ((kδ, ∞))` for k = 0..len, summed from the right.
    pub fn tail_masses(&self) -> Vec<f64> {
        let mut tail = vec![0.0; self.masses.len()];
        let mut acc = 0.0;
        for k in (0..self.masses.len()).rev() {
            tail[k] = acc;
            acc += self.masses[k];
        }
        tail
    }

    /// Span of the measure (a multiple of the grid step δ).
    pub fn span(&self) -> Rational {
        let g = self
            .masses
            .iter()
            .enumerate()
            .filter(|(k, m)| *k > 0 && **m > 0.0)
            .fold(0u64, |g, (k, _)| num_integer::gcd(g, k as u64));
        &self.delta * Rational::from_integer(g.into())
    }
}
