//! Renewal masses on long grids: U(z) = 1/(1 − M(z)) as a power series,
//! inverted by Newton iteration B ← B(2 − AB) with FFT products.
//!
//! Single-threaded and with a fixed plan sequence, so the output does not
//! depend on how many workers the caller runs.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// First `len` coefficients of the product of two power series.
fn multiply(planner: &mut FftPlanner<f64>, a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let a = &a[..a.len().min(len)];
    let b = &b[..b.len().min(len)];
    let size = (a.len() + b.len()).next_power_of_two();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.iter().take(len).map(|c| c.re * scale).collect()
}

/// U({kδ}) for k < n from lattice masses `m` (m[0] may be positive).
pub(crate) fn renewal_masses_fft(m: &[f64], n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut a: Vec<f64> = m.iter().take(n).map(|x| -x).collect();
    a[0] += 1.0;
    let mut planner = FftPlanner::new();
    let mut b = vec![1.0 / a[0]];
    let mut len = 1;
    while len < n {
        len = (2 * len).min(n);
        let ab = multiply(&mut planner, &a, &b, len);
        let mut c: Vec<f64> = ab.iter().map(|x| -x).collect();
        c[0] += 2.0;
        b = multiply(&mut planner, &b, &c, len);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal::renewal_masses_recursive;

    #[test]
    fn matches_recursion_on_a_wide_support() {
        let k_max = 150;
        let raw: Vec<f64> = (0..=k_max).map(|k| if k == 0 { 0.0 } else { 1.0 + (k as f64 * 0.37).sin().abs() }).collect();
        let total: f64 = raw.iter().sum();
        let m: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let support: Vec<(usize, f64)> = m.iter().enumerate().skip(1).map(|(k, &x)| (k, x)).collect();
        let n = 1 << 17;
        let fast = renewal_masses_fft(&m, n);
        let slow = renewal_masses_recursive(0.0, &support, n);
        let worst = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-11, "{worst}");
    }

    #[test]
    fn handles_an_atom_at_zero() {
        let m = [0.25, 0.25, 0.5];
        let fast = renewal_masses_fft(&m, 300);
        let slow = renewal_masses_recursive(0.25, &[(1, 0.25), (2, 0.5)], 300);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
