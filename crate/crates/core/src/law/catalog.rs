//! Named laws used by tests, examples and the acceptance runs.
//!
//! The unstandardized constructors keep the natural units (integer τ,
//! natural rewards); [`standardized_suite`] maps them all to E X = 0,
//! E X² = 1, E τ = 1.

use super::{standardize, Atom, JointLaw, PositiveLaw, Rational};
use num_bigint::BigInt;

fn law(atoms: Vec<Atom>) -> JointLaw {
    JointLaw::discrete(atoms).expect("catalog law is valid")
}

fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Independent product of a τ-law and a reward law.
pub fn independent(taus: &[(Rational, f64)], rewards: &[(f64, f64)]) -> JointLaw {
    let mut atoms = Vec::with_capacity(taus.len() * rewards.len());
    for (t, pt) in taus {
        for &(x, px) in rewards {
            atoms.push(Atom::new(t.clone(), x, pt * px));
        }
    }
    law(atoms)
}

fn ints(values: &[(i64, f64)]) -> Vec<(Rational, f64)> {
    values.iter().map(|&(t, p)| (Rational::from_integer(t.into()), p)).collect()
}

const SIGNS: [(f64, f64); 2] = [(-1.0, 0.5), (1.0, 0.5)];

/// τ ≡ 1, X = ±1 with probability ½ each.
pub fn rademacher() -> JointLaw {
    independent(&ints(&[(1, 1.0)]), &SIGNS)
}

/// τ uniform on {1, 2}, X = ±1 independent of τ.
pub fn uniform12_signs() -> JointLaw {
    independent(&ints(&[(1, 0.5), (2, 0.5)]), &SIGNS)
}

/// τ uniform on {1, 4}, X = √τ.
pub fn sqrt_two_point() -> JointLaw {
    law(vec![Atom::int(1, 1.0, 0.5), Atom::int(4, 2.0, 0.5)])
}

/// τ uniform on {1, 2, 3}, X = τ.
pub fn linear_in_tau() -> JointLaw {
    law((1..=3).map(|t| Atom::int(t, t as f64, 1.0 / 3.0)).collect())
}

/// τ ≡ 1, X ∈ {−1, 2} with probabilities (2/3, 1/3).
pub fn skewed_reward() -> JointLaw {
    law(vec![Atom::int(1, -1.0, 2.0 / 3.0), Atom::int(1, 2.0, 1.0 / 3.0)])
}

/// τ ∈ {1, 2} and X = ±1, positively correlated.
pub fn correlated_binary() -> JointLaw {
    law(vec![
        Atom::int(1, -1.0, 0.25),
        Atom::int(1, 1.0, 0.125),
        Atom::int(2, -1.0, 0.25),
        Atom::int(2, 1.0, 0.375),
    ])
}

/// τ uniform on {1, 3}, X ∈ {−1, 0, 1} with probabilities (¼, ½, ¼).
pub fn three_point_reward() -> JointLaw {
    independent(&ints(&[(1, 0.5), (3, 0.5)]), &[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])
}

/// τ uniform on {2, 3} (span 1), X = ±1 independent.
pub fn two_three_signs() -> JointLaw {
    independent(&ints(&[(2, 0.5), (3, 0.5)]), &SIGNS)
}

/// τ ∈ {1, 2, 4} with probabilities (½, ¼, ¼), X = log₂ τ.
pub fn log_reward() -> JointLaw {
    law(vec![Atom::int(1, 0.0, 0.5), Atom::int(2, 1.0, 0.25), Atom::int(4, 2.0, 0.25)])
}

/// τ ∈ {½, 3/2} uniform, X = 2τ − 2.
pub fn half_integer_linear() -> JointLaw {
    law(vec![Atom::new(ratio(1, 2), -1.0, 0.5), Atom::new(ratio(3, 2), 1.0, 0.5)])
}

/// τ uniform on {1, …, 5}, X uniform on {−2, …, 2}, independent.
pub fn spread_reward() -> JointLaw {
    let taus: Vec<(i64, f64)> = (1..=5).map(|t| (t, 0.2)).collect();
    let xs: Vec<(f64, f64)> = (-2..=2).map(|x| (x as f64, 0.2)).collect();
    independent(&ints(&taus), &xs)
}

/// Geometric τ on {1, 2, …} (success probability `p`, tail beyond `k_max`
/// lumped onto `k_max`), X = ±1 independent.
pub fn geometric_signs(p: f64, k_max: i64) -> JointLaw {
    let mut taus = Vec::with_capacity(k_max as usize);
    let mut survival = 1.0;
    for k in 1..k_max {
        taus.push((k, survival * p));
        survival *= 1.0 - p;
    }
    taus.push((k_max, survival));
    independent(&ints(&taus), &SIGNS)
}

/// X = √τ with τ ~ Exp(1).
pub fn exponential_sqrt() -> JointLaw {
    JointLaw::scaled_sqrt(PositiveLaw::Exponential { rate: 1.0 }, 1.0, 0.0).expect("valid parameters")
}

/// Lattice laws mapped to E X = 0, E X² = 1, E τ = 1.
pub fn standardized_suite() -> Vec<(&'static str, JointLaw)> {
    let raw: Vec<(&'static str, JointLaw)> = vec![
        ("rademacher", rademacher()),
        ("uniform12-signs", uniform12_signs()),
        ("sqrt-two-point", sqrt_two_point()),
        ("linear-in-tau", linear_in_tau()),
        ("skewed-reward", skewed_reward()),
        ("correlated-binary", correlated_binary()),
        ("three-point-reward", three_point_reward()),
        ("two-three-signs", two_three_signs()),
        ("log-reward", log_reward()),
        ("half-integer-linear", half_integer_linear()),
        ("spread-reward", spread_reward()),
        ("geometric-signs", geometric_signs(0.5, 12)),
    ];
    raw.into_iter()
        .map(|(name, l)| (name, standardize(&l).expect("catalog law has positive reward variance")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::validate;

    #[test]
    fn suite_is_standardized() {
        let suite = standardized_suite();
        assert!(suite.len() >= 10);
        for (name, law) in suite {
            let rep = validate(&law).unwrap();
            assert!(rep.standardized, "{name}: {rep:?}");
            assert!(law.as_discrete().is_some());
        }
    }
}
