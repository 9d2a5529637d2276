use polyflow::cli::{run_with, EXIT_INPUT, EXIT_OK};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("polyflow").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn roots_of(json: &Value) -> Vec<(f64, f64)> {
    json["roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["re"].as_f64().unwrap(), r["im"].as_f64().unwrap()))
        .collect()
}

#[test]
fn solves_from_coefficients() {
    let (code, out, _) = run(&["solve", "--coeffs", "0,-1"]);
    assert_eq!(code, EXIT_OK);
    let json: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["degree"], 2);
    let roots = roots_of(&json);
    assert!((roots[0].0 + 1.0).abs() < 1e-12 && roots[0].1.abs() < 1e-12);
    assert!((roots[1].0 - 1.0).abs() < 1e-12 && roots[1].1.abs() < 1e-12);
    assert!(json["residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() <= 1e-12));
}

#[test]
fn json_keys_in_documented_order() {
    let (_, out, _) = run(&["solve", "--roots", "1,2,3", "--starts", "2"]);
    let keys: Vec<&str> = ["degree", "roots", "residuals", "restarts", "starts", "consensus_discrepancy", "warnings", "pre_polish_residuals"]
        .into_iter()
        .collect();
    let positions: Vec<usize> = keys.iter().map(|k| out.find(&format!("\"{k}\"")).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{out}");
    let json: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["starts"], 2);
    let roots = roots_of(&json);
    for (got, want) in roots.iter().zip([1.0, 2.0, 3.0]) {
        assert!((got.0 - want).abs() < 1e-10 && got.1.abs() < 1e-10);
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = run(&["solve", "--coeffs", "1+i,-2,0.5", "--seed", "7"]);
    let b = run(&["solve", "--coeffs", "1+i,-2,0.5", "--seed", "7"]);
    assert_eq!(a, b);
}

#[test]
fn seed_from_environment() {
    // only this test touches the variable
    std::env::set_var("POLYFLOW_SEED", "7");
    let from_env = run(&["solve", "--coeffs", "1+i,-2,0.5"]);
    std::env::set_var("POLYFLOW_SEED", "not a number");
    let bad = run(&["solve", "--coeffs", "1+i,-2,0.5"]);
    std::env::remove_var("POLYFLOW_SEED");
    assert_eq!(from_env, run(&["solve", "--coeffs", "1+i,-2,0.5", "--seed", "7"]));
    assert_eq!(bad.0, EXIT_INPUT);
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(run(&["solve", "--coeffs", "1,2", "--coeffs", "3"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", "--coeffs", "1,2", "--roots", "3"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve"]).0, EXIT_INPUT);
    let (code, _, err) = run(&["solve", "--coeffs", "1,2j"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("2j"), "{err}");
    assert_eq!(run(&["solve", "--coeffs", "1,nan"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", "--input", "/nonexistent/polyflow.json"]).0, EXIT_INPUT);
}

#[test]
fn reads_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"coeffs": ["0", "-4"], "leading": "2"}"#).unwrap();
    let (code, out, err) = run(&["solve", "--input", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let roots = roots_of(&serde_json::from_str(&out).unwrap());
    // 2z² − 4 = 0
    let s = 2f64.sqrt();
    assert!((roots[0].0 + s).abs() < 1e-12 && (roots[1].0 - s).abs() < 1e-12);
}

#[test]
fn writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let (code, _, err) = run(&["solve", "--coeffs", "0,0,-1", "--trajectory", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,n,re,im"));
    let rows: Vec<(f64, usize)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 4);
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len() % 3, 0);
    assert_eq!(rows[0], (0.0, 0));
    assert_eq!(rows[rows.len() - 1], (1.0, 2));
    assert!(rows.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn csv_and_plain_outputs() {
    let (code, out, _) = run(&["solve", "--coeffs", "0,-1", "--output", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("index,re,im,residual,pre_polish_residual\n"));
    assert_eq!(out.lines().count(), 3);
    let (code, out, _) = run(&["solve", "--coeffs", "0,-1", "--output", "plain"]);
    assert_eq!(code, EXIT_OK);
    assert!(!out.is_empty());
}
