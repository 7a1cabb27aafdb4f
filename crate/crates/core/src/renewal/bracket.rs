//! Two-sided bounds on the renewal measure of a continuous τ-law.
//!
//! Rounding every inter-arrival down (up) to the δ-grid moves every renewal
//! epoch earlier (later), so for all s the counts satisfy
//! U_up([0, s)) ≤ U([0, s)) ≤ U_down([0, s)). Interval masses follow by
//! differencing the cumulative bounds.

use crate::law::rational::to_f64;
use crate::law::{ContinuousTau, LatticeMeasure, Rational};

use super::{lattice_table, RenewalError, RenewalTable};

/// Renewal tables of ⌊τ/δ⌋δ (`down`) and ⌈τ/δ⌉δ (`up`).
#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub down: RenewalTable,
    pub up: RenewalTable,
}

impl Bracket {
    /// Lower and upper bounds on U([0, s)).
    pub fn cumulative(&self, s: f64) -> (f64, f64) {
        (self.up.interval_mass(0.0, s), self.down.interval_mass(0.0, s))
    }

    /// Lower and upper bounds on U([u, u + v)).
    pub fn interval(&self, u: f64, v: f64) -> (f64, f64) {
        let (end_lo, end_hi) = self.cumulative(u + v);
        let (start_lo, start_hi) = if u > 0.0 { self.cumulative(u) } else { (0.0, 0.0) };
        ((end_lo - start_hi).max(0.0), end_hi - start_lo)
    }
}

/// Brackets U_μ on [0, horizon] for a continuous τ-law.
///
/// Mass of the rounded laws beyond the horizon is lumped on the first grid
/// point past it, which leaves the tables on [0, horizon] unchanged.
pub fn nonlattice_bracket(tau: &dyn ContinuousTau, delta: &Rational, horizon: f64) -> Result<Bracket, RenewalError> {
    let d = to_f64(delta);
    if !(d > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(RenewalError::InvalidParameter(format!("need δ > 0 and a finite horizon, got δ = {d}")));
    }
    let k_max = (horizon / d).ceil() as usize + 1;
    let cdf = |t: f64| tau.cdf(t).ok_or(RenewalError::CdfUnavailable);
    let cdf_left = |t: f64| tau.cdf_left(t).ok_or(RenewalError::CdfUnavailable);

    // down[k] = P(kδ ≤ τ < (k+1)δ), up[k] = P((k−1)δ < τ ≤ kδ).
    let mut down = vec![0.0; k_max + 2];
    let mut up = vec![0.0; k_max + 2];
    let mut left_prev = cdf_left(0.0)?;
    let mut right_prev = cdf(0.0)?;
    for k in 0..=k_max {
        let t = (k + 1) as f64 * d;
        let left = cdf_left(t)?;
        let right = cdf(t)?;
        down[k] = (left - left_prev).max(0.0);
        up[k + 1] = (right - right_prev).max(0.0);
        left_prev = left;
        right_prev = right;
    }
    down[k_max + 1] = (1.0 - left_prev).max(0.0);
    up[k_max + 1] += (1.0 - right_prev).max(0.0);
    let len = k_max + 1;
    let down = lattice_table(&normalized(delta, down)?, len);
    let up = lattice_table(&normalized(delta, up)?, len);
    Ok(Bracket { down, up })
}

fn normalized(delta: &Rational, mut masses: Vec<f64>) -> Result<LatticeMeasure, RenewalError> {
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    Ok(LatticeMeasure::new(delta.clone(), masses)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::PositiveLaw;
    use num_bigint::BigInt;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    /// τ ≡ 1 presented through its CDF.
    struct UnitStep;

    impl ContinuousTau for UnitStep {
        fn cdf(&self, t: f64) -> Option<f64> {
            Some(if t >= 1.0 { 1.0 } else { 0.0 })
        }
        fn cdf_left(&self, t: f64) -> Option<f64> {
            Some(if t > 1.0 { 1.0 } else { 0.0 })
        }
        fn mean(&self) -> f64 {
            1.0
        }
    }

    struct NoCdf;

    impl ContinuousTau for NoCdf {
        fn cdf(&self, _: f64) -> Option<f64> {
            None
        }
        fn mean(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn lattice_law_gives_a_tight_bracket() {
        let b = nonlattice_bracket(&UnitStep, &r(1, 2), 10.0).unwrap();
        for n in 0..9 {
            let (lo, hi) = b.interval(n as f64, 1.0);
            assert_eq!((lo, hi), (1.0, 1.0), "{n}");
        }
    }

    #[test]
    fn exponential_bracket_contains_lebesgue_measure() {
        // Poisson process: U = δ₀ + Lebesgue, so U([u, u+1)) = 1 for u > 0.
        let exp = PositiveLaw::Exponential { rate: 1.0 };
        let b = nonlattice_bracket(&exp, &r(1, 64), 12.0).unwrap();
        for i in 4..40 {
            let u = 0.25 * i as f64;
            let (lo, hi) = b.interval(u, 1.0);
            assert!(lo <= 1.0 && 1.0 <= hi, "u={u}: [{lo}, {hi}]");
        }
        let (lo, hi) = b.cumulative(5.0);
        assert!(lo <= 6.0 && 6.0 <= hi);
    }

    #[test]
    fn bracket_width_halves_with_delta() {
        let exp = PositiveLaw::Exponential { rate: 1.0 };
        let width = |den: i64| {
            let b = nonlattice_bracket(&exp, &r(1, den), 6.0).unwrap();
            let (lo, hi) = b.interval(3.0, 1.0);
            hi - lo
        };
        let ratio = width(64) / width(128);
        assert!((ratio - 2.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn cumulative_ordering() {
        let g = PositiveLaw::Gamma { shape: 2.0, scale: 0.5 };
        let b = nonlattice_bracket(&g, &r(1, 32), 8.0).unwrap();
        let (mut down, mut up) = (0.0, 0.0);
        for (d, u) in b.down.masses().iter().zip(b.up.masses()) {
            down += d;
            up += u;
            assert!(up <= down + 1e-12);
        }
        assert!(matches!(nonlattice_bracket(&NoCdf, &r(1, 4), 2.0), Err(RenewalError::CdfUnavailable)));
    }
}
