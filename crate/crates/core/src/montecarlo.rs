//! Monte Carlo for S(t): naive and exponentially tilted tail estimates, and
//! the moderate-deviation rate −ln P(S(t) > x√t) / x².
//!
//! Sample i of a run draws from its own ChaCha8 stream (seed, i). Per-sample
//! values are collected in index order and reduced by pairwise summation, so
//! estimates are bit-identical for any number of worker threads.
//!
//! Lattice laws skip ahead: while the remaining time r admits b = ⌊r/τ_max⌋
//! further pairs no matter what is drawn, the atom counts of the next b pairs
//! are drawn as one multinomial. Only the last few pairs before t are drawn
//! one at a time.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::law::rational::to_f64;
use crate::law::{sample_pair, validate, DiscreteLaw, JointLaw, LawError};
use crate::numeric::pairwise_sum;
use crate::tilt::{tilt_for_drift, tilted_pair_law, TiltError, DEFAULT_TOL};

/// Blocks shorter than this are drawn pair by pair.
const MIN_BLOCK: u64 = 8;

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tilted estimation needs a standardized law (E X = 0, E X² = 1, E τ = 1)")]
    NotStandardized,
    #[error("likelihood-ratio weight is not finite at t = {t}, x = {x}")]
    WeightOverflow { t: f64, x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Tilted,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Tilted => "tilted",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Method::Naive => 1,
            Method::Tilted => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub t: f64,
    pub x: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub method: Method,
    /// −ln p̂ / x²; infinite when no sample hit.
    pub rate: f64,
    /// Delta-method standard error of `rate`.
    pub rate_std_err: f64,
    /// Samples with a nonzero contribution.
    pub hits: u64,
    /// Tilt parameter used; 0 for the naive estimator.
    pub lambda: f64,
}

impl TailEstimate {
    fn new(t: f64, x: f64, method: Method, lambda: f64, stats: SampleStats) -> Self {
        let SampleStats { n, mean, std_err, hits } = stats;
        let x2 = x * x;
        Self {
            t,
            x,
            p_hat: mean,
            std_err,
            n_samples: n,
            method,
            rate: -mean.ln() / x2,
            rate_std_err: std_err / (mean * x2),
            hits,
            lambda,
        }
    }

    pub fn reference(&self) -> f64 {
        corrected_reference(self.x)
    }
}

/// ½ + ln(x√(2π))/x², the rate of the Gaussian tail Φ̄(x) ≈ φ(x)/x.
pub fn corrected_reference(x: f64) -> f64 {
    0.5 + (x * (2.0 * PI).sqrt()).ln() / (x * x)
}

/// Counter-based random streams: one ChaCha8 stream per sample index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent family of streams labelled by `key`.
    pub fn keyed(&self, key: u64) -> Self {
        Self { seed: splitmix64(self.seed ^ splitmix64(key)) }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// One simulated path up to time t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// S(t) = X₁ + … + X_{N(t)}.
    pub s: f64,
    pub renewals: u64,
    /// X₁ + … + X_{N(t)+1}, including the straddling pair.
    pub sum_x: f64,
    /// τ₁ + … + τ_{N(t)+1}.
    pub sum_tau: f64,
}

struct LatticeSampler {
    law: DiscreteLaw,
    delta: f64,
    steps: Vec<u64>,
    xs: Vec<f64>,
    /// p_k / (p_k + … + p_last): success probabilities of the sequential
    /// binomials that make up a multinomial draw.
    conditional: Vec<f64>,
    max_step: u64,
}

impl LatticeSampler {
    fn new(law: &DiscreteLaw) -> Result<Self, McError> {
        let span = law.span();
        let steps = law.lattice_indices(&span)?;
        let probs: Vec<f64> = law.atoms().iter().map(|a| a.p).collect();
        let mut conditional = vec![0.0; probs.len()];
        let mut rest = 0.0;
        for k in (0..probs.len()).rev() {
            rest += probs[k];
            conditional[k] = if rest > 0.0 { (probs[k] / rest).clamp(0.0, 1.0) } else { 0.0 };
        }
        Ok(Self {
            law: law.clone(),
            delta: to_f64(&span),
            max_step: steps.iter().copied().max().unwrap_or(1),
            steps,
            xs: law.atoms().iter().map(|a| a.x).collect(),
            conditional,
        })
    }

    fn path<R: Rng>(&self, t: f64, rng: &mut R) -> Path {
        // T_n > t  ⇔  (lattice sum) > ⌊t/δ⌋, with slack for t on the lattice.
        let q = t / self.delta;
        let limit = if q < 0.0 { -1i128 } else { (q + 1e-9 * q.max(1.0)).floor() as i128 };
        let mut m: i128 = 0;
        let mut s = 0.0;
        let mut renewals = 0u64;
        loop {
            let remaining = (limit - m).max(0) as u64;
            let block = if limit < 0 { 0 } else { remaining / self.max_step };
            if block >= MIN_BLOCK {
                let mut left = block;
                for k in 0..self.steps.len() {
                    if left == 0 {
                        break;
                    }
                    let c = if k + 1 == self.steps.len() {
                        left
                    } else {
                        Binomial::new(left, self.conditional[k]).expect("probability in [0, 1]").sample(rng)
                    };
                    m += (c as i128) * self.steps[k] as i128;
                    s += c as f64 * self.xs[k];
                    left -= c;
                }
                renewals += block;
                continue;
            }
            let i = self.law.atom_index_for(rng.random::<f64>());
            let next = m + self.steps[i] as i128;
            if next > limit {
                return Path { s, renewals, sum_x: s + self.xs[i], sum_tau: next as f64 * self.delta };
            }
            m = next;
            s += self.xs[i];
            renewals += 1;
        }
    }
}

/// Path generator for a joint law: skip-ahead on lattices, pair by pair
/// otherwise.
pub struct PathSampler {
    inner: Inner,
}

enum Inner {
    Lattice(LatticeSampler),
    Pairwise(JointLaw),
}

impl PathSampler {
    pub fn new(law: &JointLaw) -> Result<Self, McError> {
        let inner = match law {
            JointLaw::Discrete(d) => Inner::Lattice(LatticeSampler::new(d)?),
            other => Inner::Pairwise(other.clone()),
        };
        Ok(Self { inner })
    }

    pub fn path<R: Rng>(&self, t: f64, rng: &mut R) -> Path {
        match &self.inner {
            Inner::Lattice(l) => l.path(t, rng),
            Inner::Pairwise(law) => {
                let (mut time, mut s, mut renewals) = (0.0, 0.0, 0u64);
                loop {
                    let (tau, x) = sample_pair(law, rng);
                    if time + tau > t {
                        return Path { s, renewals, sum_x: s + x, sum_tau: time + tau };
                    }
                    time += tau;
                    s += x;
                    renewals += 1;
                }
            }
        }
    }
}

/// One draw of S(t).
pub fn simulate_s<R: Rng>(law: &JointLaw, t: f64, rng: &mut R) -> Result<f64, McError> {
    Ok(PathSampler::new(law)?.path(t, rng).s)
}

#[derive(Debug, Clone, Copy)]
struct SampleStats {
    n: u64,
    mean: f64,
    std_err: f64,
    hits: u64,
}

/// Per-sample values in index order.
fn sample_values<F>(n: u64, streams: &Streams, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    (0..n).into_par_iter().map(|i| f(&mut streams.rng(i))).collect()
}

fn sample_stats(values: &[f64], binomial: bool) -> SampleStats {
    let n = values.len() as u64;
    let mean = pairwise_sum(values) / n as f64;
    let hits = values.iter().filter(|v| **v != 0.0).count() as u64;
    let var = if binomial {
        mean * (1.0 - mean)
    } else if n > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        pairwise_sum(&dev) / (n - 1) as f64
    } else {
        0.0
    };
    SampleStats { n, mean, std_err: (var.max(0.0) / n as f64).sqrt(), hits }
}

fn check_point(t: f64, x: f64, n_samples: u64) -> Result<(), McError> {
    if n_samples == 0 {
        return Err(McError::InvalidParameter("n_samples must be at least 1".into()));
    }
    if !(t >= 0.0) || !t.is_finite() || !x.is_finite() {
        return Err(McError::InvalidParameter(format!("need finite t ≥ 0 and finite x, got t = {t}, x = {x}")));
    }
    Ok(())
}

/// Frequency of {S(t) > x√t} over `n_samples` paths, binomial standard error.
pub fn tail_naive(law: &JointLaw, t: f64, x: f64, n_samples: u64, streams: &Streams) -> Result<TailEstimate, McError> {
    check_point(t, x, n_samples)?;
    let sampler = PathSampler::new(law)?;
    let level = x * t.sqrt();
    let values = sample_values(n_samples, streams, |rng| if sampler.path(t, rng).s > level { 1.0 } else { 0.0 });
    Ok(TailEstimate::new(t, x, Method::Naive, 0.0, sample_stats(&values, true)))
}

/// Importance-sampling estimate of P(S(t) > x√t) under the tilt whose drift
/// is x/√t.
///
/// Every pair up to and including the one straddling t is drawn from the
/// tilted pair law, and the path carries the likelihood ratio
/// exp(−λ Σ Xᵢ + η_λ Σ τᵢ) over those N(t) + 1 pairs.
pub fn tail_tilted(law: &JointLaw, t: f64, x: f64, n_samples: u64, streams: &Streams) -> Result<TailEstimate, McError> {
    check_point(t, x, n_samples)?;
    if !(x > 0.0) || !(t > 0.0) {
        return Err(McError::InvalidParameter(format!("tilted estimation needs x > 0 and t > 0, got t = {t}, x = {x}")));
    }
    if !validate(law)?.standardized {
        return Err(McError::NotStandardized);
    }
    let tilt = tilt_for_drift(law, x / t.sqrt(), DEFAULT_TOL)?;
    let sampler = PathSampler::new(&tilted_pair_law(&tilt)?)?;
    let (lambda, eta) = (tilt.lambda, tilt.eta);
    let level = x * t.sqrt();
    let values = sample_values(n_samples, streams, |rng| {
        let p = sampler.path(t, rng);
        if p.s > level {
            (-lambda * p.sum_x + eta * p.sum_tau).exp()
        } else {
            0.0
        }
    });
    let stats = sample_stats(&values, false);
    if !stats.mean.is_finite() || !stats.std_err.is_finite() {
        return Err(McError::WeightOverflow { t, x });
    }
    Ok(TailEstimate::new(t, x, Method::Tilted, lambda, stats))
}

/// Stream key of one (method, t, x) point, so each point's randomness does
/// not depend on the rest of the schedule.
fn point_key(method: Method, t: f64, x: f64) -> u64 {
    splitmix64(splitmix64(method.tag() ^ t.to_bits()) ^ x.to_bits())
}

/// Tail estimates and rates along a schedule with x increasing and x/√t
/// decreasing.
pub fn mdp_rate_scan(
    law: &JointLaw,
    schedule: &[(f64, f64)],
    n_samples: u64,
    methods: &[Method],
    streams: &Streams,
) -> Result<Vec<TailEstimate>, McError> {
    for w in schedule.windows(2) {
        let ((t0, x0), (t1, x1)) = (w[0], w[1]);
        if !(x1 > x0) || !(x1 / t1.sqrt() < x0 / t0.sqrt()) {
            return Err(McError::InvalidParameter(format!(
                "schedule must have x increasing and x/√t decreasing: ({t0}, {x0}) then ({t1}, {x1})"
            )));
        }
    }
    let mut rows = Vec::with_capacity(schedule.len() * methods.len());
    for &(t, x) in schedule {
        for &m in methods {
            let s = streams.keyed(point_key(m, t, x));
            rows.push(match m {
                Method::Naive => tail_naive(law, t, x, n_samples, &s)?,
                Method::Tilted => tail_tilted(law, t, x, n_samples, &s)?,
            });
        }
    }
    Ok(rows)
}

/// Trend verdict for a rate scan of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTrend {
    /// Rates strictly decrease along the schedule.
    pub decreasing: bool,
    /// Rates stay above ½ (the limit is approached from above).
    pub above_half: bool,
    /// |rate − reference| in units of the rate standard error, per point.
    pub tracking_z: Vec<f64>,
}

impl RateTrend {
    pub fn tracks_within(&self, z: f64) -> bool {
        self.tracking_z.iter().all(|v| *v <= z)
    }
}

pub fn rate_trend(rows: &[TailEstimate]) -> RateTrend {
    RateTrend {
        decreasing: rows.windows(2).all(|w| w[1].rate < w[0].rate),
        above_half: rows.iter().all(|r| r.rate > 0.5),
        tracking_z: rows.iter().map(|r| (r.rate - r.reference()).abs() / r.rate_std_err).collect(),
    }
}
