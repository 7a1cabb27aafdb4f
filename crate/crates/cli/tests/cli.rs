use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs the binary on `config` (a path, or JSON text written next to the
/// shipped laws) and returns (exit code, output directory).
fn rrmd(config: &str, extra: &[&str]) -> (i32, tempfile::TempDir) {
    let out = tempfile::tempdir().unwrap();
    let path = if config.trim_start().starts_with('{') {
        let p = out.path().join("config.json");
        let text = config.replace("LAWS", &configs().join("laws").display().to_string());
        std::fs::write(&p, text).unwrap();
        p
    } else {
        configs().join(config)
    };
    let status = Command::new(env!("CARGO_BIN_EXE_rrmd"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(out.path().join("out"))
        .args(extra)
        .output()
        .unwrap();
    (status.status.code().unwrap(), out)
}

fn summary(dir: &tempfile::TempDir) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap()
}

fn error(dir: &tempfile::TempDir) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/error.json")).unwrap()).unwrap()
}

fn csv(dir: &tempfile::TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join("out").join(format!("{name}.csv"))).unwrap()
}

#[test]
fn identity_check_on_the_sign_walk_is_exact() {
    let (code, dir) = rrmd(
        r#"{"command":"identity-check","law":"LAWS/rademacher.json",
            "lambda":{"start":-3,"stop":3,"step":0.25},"t":{"start":0,"stop":200,"step":1},
            "thresholds":{"max_relative_gap":1e-12}}"#,
        &[],
    );
    assert_eq!(code, 0);
    let s = summary(&dir);
    assert!(s["results"]["max_relative_gap"].as_f64().unwrap() <= 1e-12);
    assert_eq!(s["passed"], true);
    assert_eq!(csv(&dir, "identity-check").lines().count(), 1 + 25 * 201);
}

#[test]
fn shipped_identity_check_passes() {
    let (code, dir) = rrmd("identity-check.json", &[]);
    assert_eq!(code, 0);
    assert!(summary(&dir)["results"]["max_relative_gap"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn blackwell_on_uniform_one_two() {
    let (code, dir) = rrmd("blackwell.json", &[]);
    assert_eq!(code, 0);
    let s = summary(&dir);
    assert!(s["results"]["max_gap_from"].as_f64().unwrap() <= 1e-8);
    let rows: Vec<String> = csv(&dir, "blackwell").lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 201);
    let gap1: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((gap1 - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn failing_threshold_exits_one() {
    let (code, dir) = rrmd(
        r#"{"command":"blackwell","law":"LAWS/uniform12-signs.json","u":{"start":0,"stop":50,"step":1},
            "thresholds":{"max_gap":1e-8,"from":10}}"#,
        &[],
    );
    assert_eq!(code, 1);
    let s = summary(&dir);
    assert_eq!(s["passed"], false);
    assert_eq!(s["thresholds"][0]["pass"], false);
}

#[test]
fn eta_grid_and_provenance() {
    let (code, dir) = rrmd("eta.json", &[]);
    assert_eq!(code, 0);
    let text = csv(&dir, "eta");
    assert_eq!(text.lines().next().unwrap(), "lambda,eta,ratio,drift");
    assert_eq!(text.lines().count(), 22);
    let s = summary(&dir);
    assert_eq!(s["command"], "eta");
    assert_eq!(s["seed"], 0);
    assert_eq!(s["config"]["lambda"]["step"], 0.1);
    assert_eq!(s["law"]["moments"]["standardized"], true);
    // Every numeric cell carries 17 significant digits.
    let cell = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(cell.split('e').next().unwrap().len(), 18);
}

#[test]
fn renewal_table_and_inequality() {
    let (code, dir) = rrmd("renewal.json", &[]);
    assert_eq!(code, 0);
    let rows: Vec<f64> = csv(&dir, "renewal").lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(&rows[..5], &[1.0, 0.5, 0.75, 0.625, 0.6875]);
    assert_eq!(summary(&dir)["results"]["inequality"]["violation"], Value::Null);
}

#[test]
fn dri_report() {
    let (code, dir) = rrmd("dri.json", &[]);
    assert_eq!(code, 0);
    let s = summary(&dir);
    assert_eq!(s["results"]["monotone"], true);
    let gaps = s["results"]["riemann_gap_curve"].as_array().unwrap();
    let g: Vec<f64> = gaps.iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(g.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn nonlattice_blackwell_brackets() {
    let (code, dir) = rrmd("blackwell-exponential.json", &[]);
    assert_eq!(code, 0);
    let rows: Vec<f64> = csv(&dir, "blackwell").lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // Rounding moves each renewal epoch by at most δ = 1/256, so the
    // bracket on U([u, u+1)) widens like (u + 1)δ.
    for (i, g) in rows.iter().enumerate().skip(1) {
        let u = 0.5 * i as f64;
        assert!(*g < 2.0 * (u + 1.0) / 256.0, "u={u}: {g}");
    }
}

const MDP: &str = r#"{"command":"mdp","law":"LAWS/uniform12-signs.json","standardize":true,"seed":5,
    "schedule":[[400,1],[1600,1.5]],"n_samples":3000,"methods":["naive","tilted"]}"#;

#[test]
fn mdp_is_reproducible_across_thread_counts() {
    let (c1, a) = rrmd(MDP, &["--threads", "1"]);
    let (c2, b) = rrmd(MDP, &["--threads", "4"]);
    assert_eq!((c1, c2), (0, 0));
    let text = csv(&a, "mdp");
    assert_eq!(text, csv(&b, "mdp"));
    assert_eq!(text.lines().next().unwrap(), "t,x,method,p_hat,std_err,rate,reference");
    assert_eq!(text.lines().count(), 5);
    let (_, c) = rrmd(MDP, &["--seed", "6"]);
    assert_ne!(text, csv(&c, "mdp"));
    assert_eq!(summary(&c)["seed"], 6);
    assert_eq!(summary(&c)["config"]["seed"], 6);
}

#[test]
fn mdp_without_samples_is_an_error() {
    let (code, dir) = rrmd(
        r#"{"command":"mdp","law":"LAWS/rademacher.json","seed":1,"schedule":[[400,2]],"n_samples":0}"#,
        &[],
    );
    assert_eq!(code, 2);
    let e = error(&dir);
    assert_eq!(e["error"]["kind"], "config");
    assert_eq!(e["error"]["problems"][0]["field"], "n_samples");
}

#[test]
fn mdp_without_seed_names_the_field() {
    let (code, dir) = rrmd(r#"{"command":"mdp","law":"LAWS/rademacher.json","schedule":[[400,2]],"n_samples":10}"#, &[]);
    assert_eq!(code, 2);
    assert_eq!(error(&dir)["error"]["problems"][0]["field"], "seed");
}

#[test]
fn module_errors_are_reported() {
    // Drift of the sign walk is tanh λ < 1, so x/√t = 2 cannot be tilted to.
    let (code, dir) = rrmd(r#"{"command":"mdp","law":"LAWS/rademacher.json","seed":1,"schedule":[[1,2]],"n_samples":10}"#, &[]);
    assert_eq!(code, 2);
    assert_eq!(error(&dir)["error"]["kind"], "montecarlo");

    let (code, dir) = rrmd(r#"{"command":"mgf","law":"LAWS/exponential-sqrt.json","lambda":[1],"t":[1]}"#, &[]);
    assert_eq!(code, 2);
    assert_eq!(error(&dir)["error"]["kind"], "mgf");
}

#[test]
fn unknown_command_and_malformed_law() {
    let (code, dir) = rrmd(r#"{"command":"plot","law":{"kind":"discrete","atoms":[{"tau":"1/0","x":0,"p":1}]}}"#, &[]);
    assert_eq!(code, 2);
    let problems = error(&dir)["error"]["problems"].as_array().unwrap().clone();
    assert_eq!(problems.len(), 2);
}
