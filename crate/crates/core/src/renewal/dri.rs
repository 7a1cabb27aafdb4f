//! Direct Riemann integrability, witnessed on a finite grid.
//!
//! For a family H the report gives the envelope block sum
//! sup_h Σₙ sup_{[n,n+1)} |h|, its tails beyond N, and the gap between upper
//! and lower Riemann sums of mesh δ. Nonincreasing nonnegative functions
//! take the fast path: block suprema are left-endpoint values and the
//! Riemann gap telescopes to δ (h(0) − h(H)).

use serde::Serialize;

use crate::numeric::compensated_sum;
use crate::tilt::HFunction;

/// Points sampled per cell when bounding sup and inf of a general function.
const SAMPLES_PER_CELL: usize = 16;

pub struct DriFunction<'a> {
    pub eval: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    /// Declared nonincreasing and nonnegative on [0, ∞).
    pub nonincreasing: bool,
}

impl<'a> DriFunction<'a> {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'a>(f: F, nonincreasing: bool) -> Self {
        Self { eval: Box::new(f), nonincreasing }
    }

    /// h_λ is nonincreasing: e^{−ηt} and μ_λ((t, ∞)) both are.
    pub fn from_h(h: &'a HFunction) -> Self {
        Self::new(move |t| h.eval(t), true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriReport {
    /// sup over the family of Σ_{n<H} sup_{[n,n+1)} |h|.
    pub sup_block_sum: f64,
    /// (N, sup over the family of Σ_{N≤n<H} sup_{[n,n+1)} |h|).
    pub tail_index_curve: Vec<(usize, f64)>,
    /// (δ, sup over the family of the upper-minus-lower Riemann sum on [0, H)).
    pub riemann_gap_curve: Vec<(f64, f64)>,
    /// Whether every member took the monotone fast path.
    pub monotone: bool,
    pub horizon: usize,
}

/// Sup and inf of `f` on [a, b), sampled.
fn cell_range(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for i in 0..SAMPLES_PER_CELL {
        let v = f(a + (b - a) * i as f64 / SAMPLES_PER_CELL as f64);
        hi = hi.max(v);
        lo = lo.min(v);
    }
    // Left limit at b.
    let v = f(b - (b - a) * 1e-9);
    (hi.max(v), lo.min(v))
}

/// Block-sum, tail and Riemann-gap diagnostics on [0, H), H = max of `n_grid`.
pub fn dri_check(family: &[DriFunction<'_>], delta_grid: &[f64], n_grid: &[usize]) -> DriReport {
    let horizon = n_grid.iter().copied().max().unwrap_or(0);
    let mut block_sums: Vec<Vec<f64>> = Vec::with_capacity(family.len());
    let mut gaps = vec![0.0f64; delta_grid.len()];
    for h in family {
        let f = h.eval.as_ref();
        let blocks: Vec<f64> = (0..horizon)
            .map(|n| {
                if h.nonincreasing {
                    f(n as f64).abs()
                } else {
                    let (hi, lo) = cell_range(f, n as f64, (n + 1) as f64);
                    hi.abs().max(lo.abs())
                }
            })
            .collect();
        block_sums.push(blocks);
        for (g, &delta) in gaps.iter_mut().zip(delta_grid) {
            let gap = if h.nonincreasing {
                delta * (f(0.0) - f(horizon as f64))
            } else {
                let cells = (horizon as f64 / delta).ceil() as usize;
                delta
                    * compensated_sum((0..cells).map(|k| {
                        let (hi, lo) = cell_range(f, k as f64 * delta, (k + 1) as f64 * delta);
                        hi - lo
                    }))
            };
            *g = g.max(gap);
        }
    }
    let tail = |n: usize| {
        block_sums
            .iter()
            .map(|b| compensated_sum(b[n.min(b.len())..].iter().copied()))
            .fold(0.0, f64::max)
    };
    let mut n_sorted: Vec<usize> = n_grid.to_vec();
    n_sorted.sort_unstable();
    n_sorted.dedup();
    DriReport {
        sup_block_sum: tail(0),
        tail_index_curve: n_sorted.iter().map(|&n| (n, tail(n))).collect(),
        riemann_gap_curve: delta_grid.iter().copied().zip(gaps).collect(),
        monotone: family.iter().all(|h| h.nonincreasing),
        horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::catalog;
    use crate::tilt::{h_function, solve_eta, DEFAULT_TOL};

    #[test]
    fn exponential_function() {
        let fam = [DriFunction::new(|t: f64| (-t).exp(), true)];
        let rep = dri_check(&fam, &[0.5, 0.25, 0.125], &[5, 10, 20, 40]);
        let e = std::f64::consts::E;
        assert!(rep.sup_block_sum <= e / (e - 1.0));
        assert!((rep.sup_block_sum - (1.0 - (-40f64).exp()) / (1.0 - (-1f64).exp())).abs() < 1e-12);
        let tails: Vec<f64> = rep.tail_index_curve.iter().map(|t| t.1).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert!(tails[3] == 0.0 && tails[2] < 1e-8);
        let gaps: Vec<f64> = rep.riemann_gap_curve.iter().map(|g| g.1).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]) && gaps.iter().all(|g| *g >= 0.0));

        // The sampled envelope agrees with the monotone path.
        let slow = dri_check(&[DriFunction::new(|t: f64| (-t).exp(), false)], &[0.25], &[10]);
        let fast = dri_check(&[DriFunction::new(|t: f64| (-t).exp(), true)], &[0.25], &[10]);
        assert!((slow.sup_block_sum - fast.sup_block_sum).abs() < 1e-12);
        assert!((slow.riemann_gap_curve[0].1 - fast.riemann_gap_curve[0].1).abs() < 1e-6);
    }

    #[test]
    fn indicator_of_unit_interval() {
        let fam = [DriFunction::new(|t: f64| if (0.0..1.0).contains(&t) { 1.0 } else { 0.0 }, true)];
        let rep = dri_check(&fam, &[0.5, 0.1, 0.01], &[1, 2, 5]);
        assert_eq!(rep.sup_block_sum, 1.0);
        assert_eq!(rep.tail_index_curve, vec![(1, 0.0), (2, 0.0), (5, 0.0)]);
        let gaps: Vec<f64> = rep.riemann_gap_curve.iter().map(|g| g.1).collect();
        assert_eq!(gaps, vec![0.5, 0.1, 0.01]);
    }

    #[test]
    fn tilted_geometric_family() {
        let law = catalog::geometric_signs(0.5, 60);
        let hs: Vec<HFunction> = (-4..=4)
            .map(|i| h_function(&solve_eta(&law, 0.25 * i as f64, DEFAULT_TOL).unwrap(), 80).unwrap())
            .collect();
        let fam: Vec<DriFunction> = hs.iter().map(DriFunction::from_h).collect();
        let rep = dri_check(&fam, &[0.5, 0.25, 0.125, 0.0625], &[10, 20, 40, 60]);
        assert!(rep.monotone);
        assert!(rep.sup_block_sum.is_finite() && rep.sup_block_sum < 3.0);
        let tails: Vec<f64> = rep.tail_index_curve.iter().map(|t| t.1).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert!(tails[2] < 1e-6);
        let gaps: Vec<f64> = rep.riemann_gap_curve.iter().map(|g| g.1).collect();
        assert!(gaps.windows(2).all(|w| (w[1] - w[0] / 2.0).abs() < 1e-12));
    }
}
