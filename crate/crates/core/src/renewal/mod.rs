//! Renewal measures U = Σₙ μ^{*n} on lattices, key-renewal convolutions and
//! the convergence diagnostics behind the Blackwell and key renewal theorems.
//!
//! Lattice laws are handled exactly (up to floating-point summation). A
//! continuous τ-law is never replaced by a fine lattice; instead it is
//! bracketed between the laws of τ rounded down and up to a δ-grid.

mod bracket;
mod dri;
mod fft;

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::law::rational::to_f64;
use crate::law::{ContinuousTau, DiscreteLaw, DiscreteMeasure, LatticeMeasure, LawError, Rational};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::tilt::{self, HFunction, TiltError};

pub use bracket::{nonlattice_bracket, Bracket};
pub use dri::{dri_check, DriFunction, DriReport};

/// Above this many grid points (and with more than [`FFT_MIN_SUPPORT`]
/// support points) [`renewal_table`] inverts the generating function by FFT.
pub const FFT_MIN_POINTS: usize = 100_000;
pub const FFT_MIN_SUPPORT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenewalError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error("family is empty")]
    EmptyFamily,
    #[error("family members have different spans ({first} and {other})")]
    MixedSpans { first: String, other: String },
    #[error("grid mismatch: table step {table}, function step {function}")]
    GridMismatch { table: String, function: String },
    #[error("h must be given on a lattice for a lattice convolution")]
    NotLatticeFunction,
    #[error("τ-law has no CDF evaluator")]
    CdfUnavailable,
    #[error("{0}")]
    InvalidParameter(String),
}

/// Masses U({nδ}), n = 0..N, of the renewal measure of a lattice law.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    delta: Rational,
    masses: Vec<f64>,
    inv_mean: f64,
}

impl RenewalTable {
    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn delta_f64(&self) -> f64 {
        to_f64(&self.delta)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// λ_μ = 1 / ∫ t μ(dt).
    pub fn inv_mean(&self) -> f64 {
        self.inv_mean
    }

    /// U of the grid points with index in `range`.
    pub fn index_mass(&self, range: std::ops::Range<usize>) -> f64 {
        compensated_sum(self.masses[range].iter().copied())
    }

    /// U([u, u + v)) for real u, v ≥ 0; the table must cover u + v.
    pub fn interval_mass(&self, u: f64, v: f64) -> f64 {
        let (a, b) = grid_range(u, v, self.delta_f64());
        self.index_mass(a..b.min(self.masses.len()))
    }
}

/// Indices k with u ≤ kδ < u + v. Points within 1e−9 grid steps of an
/// endpoint are treated as on it.
fn grid_range(u: f64, v: f64, delta: f64) -> (usize, usize) {
    let first = (u / delta - 1e-9).ceil().max(0.0) as usize;
    let end = ((u + v) / delta - 1e-9).ceil().max(0.0) as usize;
    (first, end.max(first))
}

/// Renewal masses of the lattice law `mu` on {0, δ, …, (n−1)δ}, by the
/// recursion u₀ = 1/(1 − m₀), uₙ = (Σ_{k≥1} mₖ uₙ₋ₖ)/(1 − m₀).
pub fn renewal_masses(mu: &LatticeMeasure, n: usize) -> Vec<f64> {
    let support: Vec<(usize, f64)> =
        mu.masses().iter().enumerate().skip(1).filter(|(_, m)| **m > 0.0).map(|(k, m)| (k, *m)).collect();
    if n > FFT_MIN_POINTS && support.len() > FFT_MIN_SUPPORT {
        return fft::renewal_masses_fft(mu.masses(), n);
    }
    renewal_masses_recursive(mu.mass(0), &support, n)
}

pub(crate) fn renewal_masses_recursive(m0: f64, support: &[(usize, f64)], n: usize) -> Vec<f64> {
    let scale = 1.0 / (1.0 - m0);
    let mut u = vec![0.0; n];
    if n == 0 {
        return u;
    }
    u[0] = scale;
    for i in 1..n {
        let mut acc = CompensatedSum::new();
        for &(k, m) in support {
            if k > i {
                break;
            }
            acc.add(m * u[i - k]);
        }
        u[i] = acc.value() * scale;
    }
    u
}

/// Renewal table of a τ-marginal on the grid of step `delta`, n = 0..N.
pub fn renewal_table(marginal: &DiscreteMeasure, delta: &Rational, n: usize) -> Result<RenewalTable, RenewalError> {
    let lattice = marginal.to_lattice(delta)?;
    Ok(lattice_table(&lattice, n + 1))
}

pub(crate) fn lattice_table(lattice: &LatticeMeasure, len: usize) -> RenewalTable {
    RenewalTable {
        delta: lattice.delta().clone(),
        masses: renewal_masses(lattice, len),
        inv_mean: 1.0 / lattice.mean(),
    }
}

/// A violation of U((u, u+v]) ≤ U([0, v)).
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityWitness {
    pub u: usize,
    pub v: usize,
    pub left: f64,
    pub right: f64,
}

/// Checks U((u, u+v]) ≤ U([0, v)) for `trials` random lattice pairs
/// (u, v in grid steps, u + v within the table).
pub fn renewal_inequality_check<R: Rng>(
    table: &RenewalTable,
    trials: usize,
    rng: &mut R,
) -> Result<(), InequalityWitness> {
    let n = table.len();
    if n < 2 {
        return Ok(());
    }
    for _ in 0..trials {
        let v = rng.random_range(1..n);
        let u = rng.random_range(0..n - v);
        let left = table.index_mass(u + 1..u + v + 1);
        let right = table.index_mass(0..v);
        if left > right * (1.0 + 1e-12) {
            return Err(InequalityWitness { u, v, left, right });
        }
    }
    Ok(())
}

/// A member of a [`LawFamily`].
#[derive(Clone)]
pub enum FamilyMember {
    Lattice(DiscreteMeasure),
    Continuous(Arc<dyn ContinuousTau>),
}

impl std::fmt::Debug for FamilyMember {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyMember::Lattice(m) => f.debug_tuple("Lattice").field(m).finish(),
            FamilyMember::Continuous(c) => write!(f, "Continuous(mean = {})", c.mean()),
        }
    }
}

/// τ-laws sharing one span; span 0 means every member is continuous and is
/// handled through brackets of step `bracket_delta`.
#[derive(Debug, Clone)]
pub struct LawFamily {
    members: Vec<FamilyMember>,
    span: Rational,
    bracket_delta: Option<Rational>,
}

impl LawFamily {
    pub fn lattice(members: Vec<DiscreteMeasure>) -> Result<Self, RenewalError> {
        let first = members.first().ok_or(RenewalError::EmptyFamily)?.span();
        if let Some(other) = members.iter().map(|m| m.span()).find(|s| *s != first) {
            return Err(RenewalError::MixedSpans { first: first.to_string(), other: other.to_string() });
        }
        Ok(Self { members: members.into_iter().map(FamilyMember::Lattice).collect(), span: first, bracket_delta: None })
    }

    pub fn continuous(members: Vec<Arc<dyn ContinuousTau>>, bracket_delta: Rational) -> Result<Self, RenewalError> {
        if members.is_empty() {
            return Err(RenewalError::EmptyFamily);
        }
        Ok(Self {
            members: members.into_iter().map(FamilyMember::Continuous).collect(),
            span: Rational::from_integer(0.into()),
            bracket_delta: Some(bracket_delta),
        })
    }

    /// {μ_λ : λ ∈ lambdas} for a discrete joint law. Tilting keeps the
    /// support, so the family has constant span.
    pub fn tilted(law: &DiscreteLaw, lambdas: &[f64]) -> Result<Self, RenewalError> {
        let joint = crate::law::JointLaw::Discrete(law.clone());
        let members = lambdas
            .iter()
            .map(|&l| {
                let t = tilt::solve_eta(&joint, l, tilt::DEFAULT_TOL)?;
                Ok(t.tau_marginal().expect("discrete tilt").clone())
            })
            .collect::<Result<Vec<_>, RenewalError>>()?;
        Self::lattice(members)
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn span(&self) -> &Rational {
        &self.span
    }
}

/// One row of a Blackwell gap table.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackwellRow {
    pub u: f64,
    /// sup over the family of |U([u, u+v)) − v λ_μ|; for continuous members
    /// the largest distance from v λ_μ to either end of the bracket.
    pub gap: f64,
    /// Index of the member attaining the sup.
    pub argmax: usize,
}

/// sup_{μ ∈ family} |U_μ([u, u+v)) − v λ_μ| for each u in `u_grid`.
pub fn blackwell_gap(family: &LawFamily, v: f64, u_grid: &[f64]) -> Result<Vec<BlackwellRow>, RenewalError> {
    if !(v > 0.0) || u_grid.iter().any(|u| !(*u >= 0.0)) {
        return Err(RenewalError::InvalidParameter("need v > 0 and u ≥ 0".into()));
    }
    let horizon = u_grid.iter().copied().fold(0.0, f64::max) + v;
    let mut rows: Vec<BlackwellRow> = u_grid.iter().map(|&u| BlackwellRow { u, gap: 0.0, argmax: 0 }).collect();
    for (i, member) in family.members.iter().enumerate() {
        let gaps: Vec<f64> = match member {
            FamilyMember::Lattice(m) => {
                let delta = &family.span;
                let d = to_f64(delta);
                let len = (horizon / d).ceil() as usize + 2;
                let table = renewal_table(m, delta, len)?;
                let limit = v * table.inv_mean();
                u_grid.iter().map(|&u| (table.interval_mass(u, v) - limit).abs()).collect()
            }
            FamilyMember::Continuous(c) => {
                let delta = family.bracket_delta.as_ref().expect("continuous family has a bracket step");
                let b = nonlattice_bracket(c.as_ref(), delta, horizon)?;
                let limit = v / c.mean();
                u_grid
                    .iter()
                    .map(|&u| {
                        let (lo, hi) = b.interval(u, v);
                        (lo - limit).abs().max((hi - limit).abs())
                    })
                    .collect()
            }
        };
        for (row, g) in rows.iter_mut().zip(gaps) {
            if g > row.gap || i == 0 {
                row.gap = g;
                row.argmax = i;
            }
        }
    }
    Ok(rows)
}

/// (U*h)(nδ) and its key-renewal limit δ λ_μ Σₖ h(kδ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRenewal {
    pub value: f64,
    pub limit: f64,
}

/// (U*h)(nδ) = Σ_{k=0}^{n} U({kδ}) h((n−k)δ) for `h` on the table's grid.
pub fn key_renewal_convolve(table: &RenewalTable, h: &HFunction, n: usize) -> Result<KeyRenewal, RenewalError> {
    let HFunction::Lattice { delta, values, .. } = h else {
        return Err(RenewalError::NotLatticeFunction);
    };
    if delta != table.delta() {
        return Err(RenewalError::GridMismatch { table: table.delta().to_string(), function: delta.to_string() });
    }
    key_renewal_values(table, values, n)
}

/// As [`key_renewal_convolve`] with h given by its grid values h(kδ);
/// values beyond the slice are zero.
pub fn key_renewal_values(table: &RenewalTable, h: &[f64], n: usize) -> Result<KeyRenewal, RenewalError> {
    if n >= table.len() {
        return Err(RenewalError::InvalidParameter(format!(
            "n = {n} is beyond the table (length {})",
            table.len()
        )));
    }
    let value = convolve_at(table.masses(), h, n);
    let limit = table.delta_f64() * table.inv_mean() * compensated_sum(h.iter().copied());
    Ok(KeyRenewal { value, limit })
}

/// Σ_{j} h[j] u[n − j] over the overlap, compensated.
pub(crate) fn convolve_at(u: &[f64], h: &[f64], n: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for (j, hj) in h.iter().enumerate().take(n + 1) {
        if *hj != 0.0 {
            acc.add(hj * u[n - j]);
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::catalog;
    use crate::tilt::{h_function, solve_eta, DEFAULT_TOL};
    use num_bigint::BigInt;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn lattice(masses: &[f64]) -> LatticeMeasure {
        LatticeMeasure::new(r(1, 1), masses.to_vec()).unwrap()
    }

    /// U({n}) as Σ_j μ^{*j}({n}) with the convolution powers built term by term.
    fn brute_force_masses(m: &[f64], n: usize) -> Vec<f64> {
        let mut total = vec![0.0; n];
        let mut power = vec![0.0; n];
        power[0] = 1.0;
        for _ in 0..n {
            for (t, p) in total.iter_mut().zip(&power) {
                *t += p;
            }
            let mut next = vec![0.0; n];
            for (i, p) in power.iter().enumerate() {
                for (k, mk) in m.iter().enumerate() {
                    if i + k < n {
                        next[i + k] += p * mk;
                    }
                }
            }
            power = next;
        }
        total
    }

    #[test]
    fn deterministic_tau() {
        let u = renewal_masses(&lattice(&[0.0, 1.0]), 12);
        assert!(u.iter().all(|&x| x == 1.0));
        assert_eq!(brute_force_masses(&[0.0, 1.0], 11), u[..11].to_vec());
    }

    #[test]
    fn geometric_tau() {
        let g = LatticeMeasure::geometric(0.5, r(1, 1), 80).unwrap();
        let u = renewal_masses(&g, 60);
        assert_eq!(u[0], 1.0);
        for (n, x) in u.iter().enumerate().skip(1) {
            assert!((x - 0.5).abs() < 1e-15, "{n}: {x}");
        }
        let brute = brute_force_masses(g.masses(), 11);
        for n in 0..11 {
            assert!((brute[n] - u[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_one_two() {
        let u = renewal_masses(&lattice(&[0.0, 0.5, 0.5]), 201);
        assert_eq!(&u[..5], &[1.0, 0.5, 0.75, 0.625, 0.6875]);
        let brute = brute_force_masses(&[0.0, 0.5, 0.5], 11);
        for n in 0..11 {
            assert!((brute[n] - u[n]).abs() < 1e-15);
        }
        for x in &u[40..] {
            assert!((x - 2.0 / 3.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn atom_at_origin_is_geometric_repetition() {
        // μ = ½δ₀ + ½δ₁: U({n}) = Σ_j C(j, n) 2^{−j} = 2 for every n.
        let u = renewal_masses(&lattice(&[0.5, 0.5]), 20);
        assert!(u.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn table_from_rational_marginal() {
        let m = DiscreteMeasure::from_points([(r(1, 2), 0.5), (r(3, 2), 0.5)]);
        let t = renewal_table(&m, &r(1, 2), 10).unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t.masses()[0], 1.0);
        assert_eq!(t.inv_mean(), 1.0);
        assert!(renewal_table(&m, &r(1, 1), 10).is_err());
    }

    #[test]
    fn inequality_on_geometric_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = lattice_table(&LatticeMeasure::geometric(0.5, r(1, 1), 60).unwrap(), 200);
        for v in 1..50 {
            let left = g.index_mass(7..7 + v);
            assert!((left - v as f64 / 2.0).abs() < 1e-12);
            assert!(left <= 1.0 + (v as f64 - 1.0) / 2.0);
        }
        assert!(renewal_inequality_check(&g, 10_000, &mut rng).is_ok());
        let t = lattice_table(&lattice(&[0.0, 0.5, 0.5]), 300);
        assert!(renewal_inequality_check(&t, 10_000, &mut rng).is_ok());
        let ones = lattice_table(&lattice(&[0.0, 1.0]), 100);
        assert!(renewal_inequality_check(&ones, 10_000, &mut rng).is_ok());
    }

    #[test]
    fn inequality_detects_a_fake_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fake = RenewalTable { delta: r(1, 1), masses: vec![1.0, 0.1, 0.1, 5.0, 5.0, 5.0], inv_mean: 1.0 };
        assert!(renewal_inequality_check(&fake, 1000, &mut rng).is_err());
    }

    #[test]
    fn blackwell_examples() {
        let ones = LawFamily::lattice(vec![DiscreteMeasure::from_points([(r(1, 1), 1.0)])]).unwrap();
        let rows = blackwell_gap(&ones, 1.0, &[0.0, 1.0, 5.0, 17.0]).unwrap();
        assert!(rows.iter().all(|row| row.gap == 0.0));

        let uni = LawFamily::lattice(vec![DiscreteMeasure::from_points([(r(1, 1), 0.5), (r(2, 1), 0.5)])]).unwrap();
        let grid: Vec<f64> = (40..=60).map(|n| n as f64).collect();
        assert!(blackwell_gap(&uni, 1.0, &grid).unwrap().iter().all(|row| row.gap <= 1e-8));

        let rad = catalog::rademacher();
        let lambdas: Vec<f64> = (-4..=4).map(|i| 0.25 * i as f64).collect();
        let fam = LawFamily::tilted(rad.as_discrete().unwrap(), &lambdas).unwrap();
        assert!(blackwell_gap(&fam, 1.0, &[0.0, 3.0, 10.0]).unwrap().iter().all(|row| row.gap == 0.0));

        let mixed = LawFamily::lattice(vec![
            DiscreteMeasure::from_points([(r(1, 1), 1.0)]),
            DiscreteMeasure::from_points([(r(2, 1), 1.0)]),
        ]);
        assert!(matches!(mixed, Err(RenewalError::MixedSpans { .. })));
    }

    #[test]
    fn key_renewal_examples() {
        let rad = catalog::rademacher();
        let t = solve_eta(&rad, 0.9, DEFAULT_TOL).unwrap();
        let table = renewal_table(t.tau_marginal().unwrap(), &r(1, 1), 50).unwrap();
        let h = h_function(&t, 51).unwrap();
        for n in 0..=50 {
            let k = key_renewal_convolve(&table, &h, n).unwrap();
            assert_eq!(k.value, 1.0);
            assert_eq!(k.limit, 1.0);
        }
        // Point mass at 0 picks out U({nδ}).
        let uni = lattice_table(&lattice(&[0.0, 0.5, 0.5]), 30);
        for n in 0..30 {
            assert_eq!(key_renewal_values(&uni, &[1.0], n).unwrap().value, uni.masses()[n]);
        }
        let geo = lattice_table(&LatticeMeasure::geometric(0.5, r(1, 1), 200).unwrap(), 201);
        let h: Vec<f64> = (0..200).map(|k| 0.5f64.powi(k)).collect();
        for n in 60..=200 {
            let k = key_renewal_values(&geo, &h, n).unwrap();
            // Explicit partial sum: 2^{−n} + ½ Σ_{j<n} 2^{−j} = 1 exactly.
            let explicit = 0.5f64.powi(n as i32) + 0.5 * (0..n).map(|j| 0.5f64.powi(j as i32)).sum::<f64>();
            assert!((k.value - explicit).abs() < 1e-15);
            assert!((k.value - 1.0).abs() <= 1e-6);
            assert!((k.limit - 1.0).abs() < 1e-15);
        }
        let wrong = h_function(&solve_eta(&catalog::half_integer_linear(), 0.3, DEFAULT_TOL).unwrap(), 5).unwrap();
        assert!(matches!(key_renewal_convolve(&table, &wrong, 3), Err(RenewalError::GridMismatch { .. })));
    }

    #[test]
    fn key_renewal_error_decays_for_tilted_family() {
        let law = catalog::standardized_suite().remove(1).1;
        let d = law.as_discrete().unwrap();
        let delta = d.span();
        let mut sup_prev = f64::INFINITY;
        for n in [50usize, 100, 150, 200] {
            let mut sup: f64 = 0.0;
            for i in -4..=4 {
                let t = solve_eta(&law, 0.25 * i as f64, DEFAULT_TOL).unwrap();
                let table = renewal_table(t.tau_marginal().unwrap(), &delta, n).unwrap();
                let h = h_function(&t, n + 1).unwrap();
                let k = key_renewal_convolve(&table, &h, n).unwrap();
                sup = sup.max((k.value - k.limit).abs());
            }
            // Past the burn-in only rounding noise remains.
            assert!(sup <= sup_prev + 1e-14);
            sup_prev = sup;
        }
        assert!(sup_prev < 1e-9);
    }

    proptest! {
        #[test]
        fn masses_bounded_and_start_at_one(raw in prop::collection::vec(0.0f64..1.0, 1..8)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.1);
            let mut masses = vec![0.0];
            masses.extend(raw.iter().map(|x| x / total));
            let s: f64 = masses.iter().sum();
            *masses.last_mut().unwrap() += 1.0 - s;
            prop_assume!(*masses.last().unwrap() >= 0.0);
            let table = lattice_table(&lattice(&masses), 300);
            prop_assert_eq!(table.masses()[0], 1.0);
            prop_assert!(table.masses().iter().all(|&u| (0.0..=1.0 + 1e-12).contains(&u)));
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            prop_assert!(renewal_inequality_check(&table, 2000, &mut rng).is_ok());
        }
    }
}
