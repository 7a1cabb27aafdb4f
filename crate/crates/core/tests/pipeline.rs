//! Law file through tilting, renewal, the MGF routes and simulation.

use rrmd::law::file::{law_from_value, law_to_value, parse_law};
use rrmd::law::rational::to_f64;
use rrmd::law::{standardize, validate, JointLaw};
use rrmd::mgf::{asymptotic_constant, mgf_direct, mgf_series};
use rrmd::montecarlo::{simulate_s, tail_naive, tail_tilted, Streams};
use rrmd::renewal::{key_renewal_convolve, renewal_table};
use rrmd::tilt::{h_function, solve_eta, DEFAULT_TOL};

const UNIFORM12: &str = r#"{"kind": "discrete", "atoms": [
  {"tau": "1", "x": -1.0, "p": 0.25},
  {"tau": "1", "x": 1.0, "p": 0.25},
  {"tau": "2", "x": -1.0, "p": 0.25},
  {"tau": "2", "x": 1.0, "p": 0.25}
]}"#;

fn law() -> JointLaw {
    standardize(&parse_law(UNIFORM12).unwrap()).unwrap()
}

#[test]
fn standardized_law_round_trips() {
    let law = law();
    let m = validate(&law).unwrap();
    assert!(m.standardized);
    let back = law_from_value(&law_to_value(&law).unwrap()).unwrap();
    assert_eq!(law_to_value(&back).unwrap(), law_to_value(&law).unwrap());
    assert_eq!(to_f64(&law.as_discrete().unwrap().span()), 2.0 / 3.0);
}

#[test]
fn key_renewal_limit_is_the_mgf_constant() {
    let law = law();
    let delta = to_f64(&law.as_discrete().unwrap().span());
    for lambda in [-0.8, 0.4, 1.5] {
        let tilt = solve_eta(&law, lambda, DEFAULT_TOL).unwrap();
        let table = renewal_table(tilt.tau_marginal().unwrap(), &law.as_discrete().unwrap().span(), 300).unwrap();
        let h = h_function(&tilt, 302).unwrap();
        let k = key_renewal_convolve(&table, &h, 300).unwrap();
        let c = asymptotic_constant(&law, &tilt).unwrap();
        assert!((k.limit - c).abs() <= 1e-12 * c, "λ={lambda}: {} vs {c}", k.limit);

        let t: Vec<f64> = (0..=300).map(|n| n as f64 * delta).collect();
        let s = mgf_series(&law, lambda, &t).unwrap();
        assert!(s.max_relative_gap() <= 1e-9);
        let last = *s.normalized().last().unwrap();
        assert!((last - k.value).abs() <= 1e-9 * c, "λ={lambda}: {last} vs {}", k.value);
        assert!((last - c).abs() <= 1e-9 * c);
    }
}

#[test]
fn simulated_mgf_matches_the_recursion() {
    let law = law();
    let (lambda, t, n) = (0.3, 20.0 / 3.0, 200_000u64);
    let exact = mgf_direct(&law, lambda, &[t]).unwrap()[0];
    let streams = Streams::new(11);
    let v: Vec<f64> = (0..n)
        .map(|i| (lambda * simulate_s(&law, t, &mut streams.rng(i)).unwrap()).exp())
        .collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn naive_and_tilted_tails_agree() {
    let law = law();
    let streams = Streams::new(3);
    let a = tail_naive(&law, 100.0, 1.5, 100_000, &streams).unwrap();
    let b = tail_tilted(&law, 100.0, 1.5, 100_000, &streams).unwrap();
    let z = (a.p_hat - b.p_hat).abs() / a.std_err.hypot(b.std_err);
    assert!(z < 4.0, "{a:?} {b:?}");
    assert!(b.std_err < a.std_err);
}
