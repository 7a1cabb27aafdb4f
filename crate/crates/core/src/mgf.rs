//! E e^{λS(t)} on a lattice, two ways.
//!
//! Direct: conditioning on the first renewal gives
//! m(t) = P(τ > t) + Σ_{s ≤ t} w_λ(s) m(t − s), w_λ(s) = E[e^{λX}; τ = s].
//! Tilted: m(t) = e^{η_λ t} (U_λ * h_λ)(t) with U_λ the renewal measure of
//! the tilted τ-marginal.
//!
//! Both routes work in log space: at λ = 3, t = 200 the values exceed the
//! f64 range. Values are defined on lattice points t = nδ; S is constant on
//! [nδ, (n+1)δ), so m extends as a step function.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::law::rational::to_f64;
use crate::law::{DiscreteLaw, JointLaw, LawError, Rational};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::renewal::{self, RenewalError};
use crate::tilt::{self, TiltError, TiltResult};

/// Largest number of lattice points held in memory. Longer grids are only
/// served by the streaming tilted route.
pub const GRID_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MgfError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
    #[error("the lattice recursion needs a discrete law; use Monte Carlo for continuous laws")]
    NotLattice,
    #[error("t = {t} is not a lattice point of step {delta}")]
    NotOnLattice { t: f64, delta: String },
    #[error("grid of {points} lattice points exceeds the cap of {cap}; only the tilted route streams")]
    GridTooLarge { points: usize, cap: usize },
    #[error("tilt was solved for a different law")]
    TiltMismatch,
}

fn discrete(law: &JointLaw) -> Result<&DiscreteLaw, MgfError> {
    law.as_discrete().ok_or(MgfError::NotLattice)
}

/// Lattice indices n with nδ = t for every t of the grid.
pub fn lattice_indices(t_grid: &[f64], delta: &Rational) -> Result<Vec<usize>, MgfError> {
    let d = to_f64(delta);
    t_grid
        .iter()
        .map(|&t| {
            let x = t / d;
            let n = x.round();
            if t >= 0.0 && (x - n).abs() <= 1e-9 * x.abs().max(1.0) {
                Ok(n as usize)
            } else {
                Err(MgfError::NotOnLattice { t, delta: delta.to_string() })
            }
        })
        .collect()
}

/// ln m(nδ) for n = 0..=n_max by the first-renewal recursion
/// m(t) = P(τ > t) + Σ_k E[e^{λX}; τ = kδ] m(t − kδ).
///
/// The recursion runs on g(nδ) = e^{−c nδ} m(nδ) with c = η_λ when it exists
/// (0 otherwise). This changes nothing algebraically, but keeps ln g of order
/// one so rounding does not build up with ln m.
pub fn mgf_direct_log(law: &JointLaw, lambda: f64, n_max: usize) -> Result<Vec<f64>, MgfError> {
    let d = discrete(law)?;
    if n_max >= GRID_CAP {
        return Err(MgfError::GridTooLarge { points: n_max + 1, cap: GRID_CAP });
    }
    let delta = d.span();
    let idx = d.lattice_indices(&delta)?;
    let total = compensated_sum(d.atoms().iter().map(|a| a.p));
    let k_max = *idx.iter().max().expect("non-empty law") as usize;

    // ln w_λ(k) and ln P(τ > kδ), combined over atoms sharing a location.
    let mut w = vec![CompensatedSum::new(); k_max + 1];
    let mut mass = vec![0.0; k_max + 1];
    let shift = d.atoms().iter().filter(|a| a.p > 0.0).map(|a| lambda * a.x).fold(f64::NEG_INFINITY, f64::max);
    for (a, &k) in d.atoms().iter().zip(&idx) {
        if a.p > 0.0 {
            w[k as usize].add(a.p / total * (lambda * a.x - shift).exp());
            mass[k as usize] += a.p / total;
        }
    }
    let dl = to_f64(&delta);
    let c = tilt::solve_eta(law, lambda, tilt::DEFAULT_TOL).map(|t| t.eta).unwrap_or(0.0);
    let ln_w: Vec<(usize, f64)> = w
        .iter()
        .enumerate()
        .filter(|(_, s)| s.value() > 0.0)
        .map(|(k, s)| (k, s.value().ln() + shift - c * k as f64 * dl))
        .collect();
    let mut ln_tail = vec![f64::NEG_INFINITY; k_max + 1];
    let mut acc = CompensatedSum::new();
    for k in (0..=k_max).rev() {
        ln_tail[k] = acc.value().max(0.0).ln();
        acc.add(mass[k]);
    }

    let mut ln_m = vec![0.0; n_max + 1];
    let mut terms: Vec<f64> = Vec::with_capacity(ln_w.len() + 1);
    for n in 0..=n_max {
        terms.clear();
        if n <= k_max && ln_tail[n] > f64::NEG_INFINITY {
            terms.push(ln_tail[n] - c * n as f64 * dl);
        }
        for &(k, lw) in &ln_w {
            if k > n {
                break;
            }
            terms.push(lw + ln_m[n - k]);
        }
        ln_m[n] = log_sum(&terms);
    }
    for (n, v) in ln_m.iter_mut().enumerate() {
        *v += c * n as f64 * dl;
    }
    Ok(ln_m)
}

fn log_sum(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + compensated_sum(terms.iter().map(|t| (t - max).exp())).ln()
}

/// E e^{λS(t)} on the grid by the direct recursion; may overflow to +inf.
pub fn mgf_direct(law: &JointLaw, lambda: f64, t_grid: &[f64]) -> Result<Vec<f64>, MgfError> {
    let idx = lattice_indices(t_grid, &discrete(law)?.span())?;
    let ln_m = mgf_direct_log(law, lambda, idx.iter().copied().max().unwrap_or(0))?;
    Ok(idx.iter().map(|&n| ln_m[n].exp()).collect())
}

fn check_tilt(law: &DiscreteLaw, tilt: &TiltResult) -> Result<(), MgfError> {
    let tilted = tilt.tau_marginal().ok_or(MgfError::NotLattice)?;
    if !tilted.support().eq(law.tau_marginal().support()) {
        return Err(MgfError::TiltMismatch);
    }
    Ok(())
}

/// ln(U_λ * h_λ)(nδ) for n = 0..=n_max, plus η_λ nδ.
pub fn mgf_tilted_log(law: &JointLaw, tilt: &TiltResult, n_max: usize) -> Result<Vec<f64>, MgfError> {
    let d = discrete(law)?;
    check_tilt(d, tilt)?;
    if n_max >= GRID_CAP {
        return Err(MgfError::GridTooLarge { points: n_max + 1, cap: GRID_CAP });
    }
    let delta = d.span();
    let dl = to_f64(&delta);
    let table = renewal::renewal_table(tilt.tau_marginal().expect("checked"), &delta, n_max)?;
    let h = tilt::h_function(tilt, n_max + 1)?;
    let h_values = h.lattice_values().expect("discrete tilt");
    Ok((0..=n_max)
        .map(|n| tilt.eta * n as f64 * dl + renewal::convolve_at(table.masses(), h_values, n).ln())
        .collect())
}

/// ln E e^{λS(nδ)} for sorted lattice indices of any size: the renewal
/// recursion and the convolution with h_λ run over a window as long as the
/// τ-support, so memory does not grow with n.
pub fn mgf_tilted_log_streaming(law: &JointLaw, tilt: &TiltResult, indices: &[usize]) -> Result<Vec<f64>, MgfError> {
    let d = discrete(law)?;
    check_tilt(d, tilt)?;
    let delta = d.span();
    let dl = to_f64(&delta);
    let lattice = tilt.tau_marginal().expect("checked").to_lattice(&delta)?;
    let k = lattice.masses().len();
    let h = tilt::h_function(tilt, k)?;
    let h_values = h.lattice_values().expect("discrete tilt").to_vec();
    let support: Vec<(usize, f64)> =
        lattice.masses().iter().enumerate().skip(1).filter(|(_, m)| **m > 0.0).map(|(j, m)| (j, *m)).collect();
    let n_end = indices.iter().copied().max().map_or(0, |n| n + 1);
    let mut window = vec![0.0f64; k];
    let mut out = vec![0.0; indices.len()];
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by_key(|&i| indices[i]);
    let mut next = 0;
    for n in 0..n_end {
        let u = if n == 0 {
            1.0
        } else {
            let mut acc = CompensatedSum::new();
            for &(j, m) in &support {
                if j > n {
                    break;
                }
                acc.add(m * window[(n - j) % k]);
            }
            acc.value()
        };
        window[n % k] = u;
        while next < order.len() && indices[order[next]] == n {
            let mut acc = CompensatedSum::new();
            for (j, hj) in h_values.iter().enumerate().take(n + 1) {
                if *hj != 0.0 {
                    acc.add(hj * window[(n - j) % k]);
                }
            }
            out[order[next]] = tilt.eta * n as f64 * dl + acc.value().ln();
            next += 1;
        }
    }
    Ok(out)
}

/// E e^{λS(t)} on the grid by the tilted route; may overflow to +inf.
pub fn mgf_tilted(law: &JointLaw, tilt: &TiltResult, t_grid: &[f64]) -> Result<Vec<f64>, MgfError> {
    let idx = lattice_indices(t_grid, &discrete(law)?.span())?;
    let n_max = idx.iter().copied().max().unwrap_or(0);
    let ln = if n_max < GRID_CAP {
        let all = mgf_tilted_log(law, tilt, n_max)?;
        idx.iter().map(|&n| all[n]).collect()
    } else {
        mgf_tilted_log_streaming(law, tilt, &idx)?
    };
    Ok(ln.into_iter().map(f64::exp).collect())
}

/// δ λ_{μ_λ} Σₖ h_λ(kδ): the limit of e^{−η_λ t} E e^{λS(t)}.
pub fn asymptotic_constant(law: &JointLaw, tilt: &TiltResult) -> Result<f64, MgfError> {
    let d = discrete(law)?;
    check_tilt(d, tilt)?;
    let delta = d.span();
    let mu = tilt.tau_marginal().expect("checked").to_lattice(&delta)?;
    let h = tilt::h_function(tilt, mu.masses().len())?;
    let sum = compensated_sum(h.lattice_values().expect("discrete tilt").iter().copied());
    Ok(to_f64(&delta) * sum / mu.mean())
}

/// Both routes and the normalized series for one λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfSeries {
    pub lambda: f64,
    pub eta: f64,
    pub t: Vec<f64>,
    /// ln E e^{λS(t)} by the direct recursion.
    pub ln_direct: Vec<f64>,
    /// ln E e^{λS(t)} by the tilted route.
    pub ln_tilted: Vec<f64>,
    /// Limit of e^{−η_λ t} E e^{λS(t)}.
    pub limit: f64,
}

impl MgfSeries {
    /// e^{−η_λ t} E e^{λS(t)} from the direct route.
    pub fn normalized(&self) -> Vec<f64> {
        self.t.iter().zip(&self.ln_direct).map(|(t, l)| (l - self.eta * t).exp()).collect()
    }

    /// |direct − tilted| / direct at each grid point.
    pub fn relative_gaps(&self) -> Vec<f64> {
        self.ln_direct.iter().zip(&self.ln_tilted).map(|(d, t)| (t - d).exp_m1().abs()).collect()
    }

    pub fn max_relative_gap(&self) -> f64 {
        self.relative_gaps().into_iter().fold(0.0, f64::max)
    }

    /// Least-squares c in |ln(normalized / limit)| ≈ c / t over the points
    /// with t ≥ `t_min` (t > 0).
    pub fn inverse_t_coefficient(&self, t_min: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (t, l) in self.t.iter().zip(&self.ln_direct) {
            if *t >= t_min && *t > 0.0 {
                let y = (l - self.eta * t - self.limit.ln()).abs();
                num += y / t;
                den += 1.0 / (t * t);
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Direct and tilted routes on a lattice t-grid for one λ.
pub fn mgf_series(law: &JointLaw, lambda: f64, t_grid: &[f64]) -> Result<MgfSeries, MgfError> {
    let d = discrete(law)?;
    let delta = d.span();
    let idx = lattice_indices(t_grid, &delta)?;
    let n_max = idx.iter().copied().max().unwrap_or(0);
    let tilt = tilt::solve_eta(law, lambda, tilt::DEFAULT_TOL)?;
    let direct = mgf_direct_log(law, lambda, n_max)?;
    let tilted = mgf_tilted_log(law, &tilt, n_max)?;
    let dl = to_f64(&delta);
    Ok(MgfSeries {
        lambda,
        eta: tilt.eta,
        t: idx.iter().map(|&n| n as f64 * dl).collect(),
        ln_direct: idx.iter().map(|&n| direct[n]).collect(),
        ln_tilted: idx.iter().map(|&n| tilted[n]).collect(),
        limit: asymptotic_constant(law, &tilt)?,
    })
}

/// sup over (λ, t) of |ln E e^{λS(t)} − η_λ t| and where it is attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Uniformity {
    pub sup: f64,
    pub lambda: f64,
    pub t: f64,
    /// sup over λ at each t of the grid.
    pub profile: Vec<(f64, f64)>,
}

impl Uniformity {
    /// max − min of the profile over t ∈ [t_lo, t_hi].
    pub fn variation(&self, t_lo: f64, t_hi: f64) -> f64 {
        let vals = self.profile.iter().filter(|(t, _)| *t >= t_lo && *t <= t_hi).map(|p| p.1);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

/// sup_{λ, t} |−η_λ t + ln E e^{λS(t)}| with the per-t profile.
pub fn uniformity_statistic(law: &JointLaw, lambdas: &[f64], t_grid: &[f64]) -> Result<Uniformity, MgfError> {
    let d = discrete(law)?;
    let delta = d.span();
    let idx = lattice_indices(t_grid, &delta)?;
    let n_max = idx.iter().copied().max().unwrap_or(0);
    let dl = to_f64(&delta);
    let per_lambda: Vec<Vec<f64>> = lambdas
        .par_iter()
        .map(|&l| {
            let eta = tilt::solve_eta(law, l, tilt::DEFAULT_TOL)?.eta;
            let ln_m = mgf_direct_log(law, l, n_max)?;
            Ok(idx.iter().map(|&n| (ln_m[n] - eta * n as f64 * dl).abs()).collect())
        })
        .collect::<Result<_, MgfError>>()?;
    let mut best = Uniformity { sup: 0.0, lambda: lambdas.first().copied().unwrap_or(0.0), t: 0.0, profile: Vec::new() };
    for (j, &n) in idx.iter().enumerate() {
        let t = n as f64 * dl;
        let mut sup_t: f64 = 0.0;
        for (i, vals) in per_lambda.iter().enumerate() {
            sup_t = sup_t.max(vals[j]);
            if vals[j] > best.sup {
                best.sup = vals[j];
                best.lambda = lambdas[i];
                best.t = t;
            }
        }
        best.profile.push((t, sup_t));
    }
    Ok(best)
}
