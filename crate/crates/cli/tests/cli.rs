use freelp_core::tensors::{
    counterexample_tensor, load_tensor, save_tensor, validate_cancellation,
};
use std::process::{Command, Output};

fn freelp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freelp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn compute_intersection_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ce3.json");
    save_tensor(&counterexample_tensor(3), &input).unwrap();
    let out = freelp(&[
        "compute",
        "--input",
        input.to_str().unwrap(),
        "--norm",
        "intersection",
        "--p",
        "4",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 3f64.powf(0.75)).abs() < 1e-9);
}

#[test]
fn compute_lp_and_sum_match_frobenius_at_p2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.json");
    let out = freelp(&[
        "random", "--n", "2", "--d", "2", "--seed", "11", "--output",
        input.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let t = load_tensor(&input).unwrap();
    let frob = t.frobenius();

    let lp = freelp(&[
        "compute", "--input", input.to_str().unwrap(), "--norm", "lp", "--p", "2",
    ]);
    assert!(lp.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&lp)).unwrap();
    assert!((v["lp"]["value"].as_f64().unwrap() - frob).abs() < 1e-10);

    let sum = freelp(&[
        "compute", "--input", input.to_str().unwrap(), "--norm", "sum", "--p", "2",
    ]);
    assert!(sum.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&sum)).unwrap();
    assert!((v["value"].as_f64().unwrap() - frob).abs() < 1e-8 * frob.max(1.0));
}

#[test]
fn random_is_deterministic_and_respects_alphabet() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = freelp(&[
            "random", "--n", "2", "--d", "2", "--seed", "7", "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let t = load_tensor(&a).unwrap();
    assert_eq!(t.support_len(), 4);

    let s = dir.path().join("s.json");
    let out = freelp(&[
        "random", "--n", "2", "--d", "2", "--alphabet", "signed", "--seed", "3",
        "--output", s.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let t = load_tensor(&s).unwrap();
    for idx in t.entries().keys() {
        assert!(validate_cancellation(idx, 2));
    }
}

#[test]
fn csv_output_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.json");
    save_tensor(&counterexample_tensor(2), &input).unwrap();
    let out = freelp(&[
        "compute", "--input", input.to_str().unwrap(), "--norm", "spectrum", "--p",
        "2", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "field,index,key,value");
    assert!(text.lines().any(|l| l.starts_with("splits,0,norm,")));
    for line in text.lines() {
        assert_eq!(line.matches(',').count(), 3, "line {line}");
    }
}

#[test]
fn spectrum_with_explicit_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.json");
    save_tensor(&counterexample_tensor(2), &input).unwrap();
    let out = freelp(&[
        "compute", "--input", input.to_str().unwrap(), "--norm", "spectrum", "--p",
        "inf", "--alpha", "2",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["transposed"], serde_json::json!(true));
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, b"{\"n\": 2}").unwrap();
    let out = freelp(&["compute", "--input", bad.to_str().unwrap(), "--norm", "lp"]);
    assert_eq!(out.status.code(), Some(2));

    let input = dir.path().join("t.json");
    save_tensor(&counterexample_tensor(2), &input).unwrap();
    let out = freelp(&[
        "compute", "--input", input.to_str().unwrap(), "--norm", "lp", "--p", "4",
        "--node-budget", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let m2 = dir.path().join("m2.json");
    let out = freelp(&[
        "random", "--n", "2", "--d", "2", "--m", "2", "--seed", "11", "--output",
        m2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = freelp(&[
        "compute", "--input", m2.to_str().unwrap(), "--norm", "sum", "--p", "1.5",
        "--max-iter", "5", "--tol", "1e-18", "--strict",
    ]);
    assert_eq!(out.status.code(), Some(4));

    let out = freelp(&["verify", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_suite_runs() {
    let out = freelp(&["verify", "counterexample", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.contains("overall,,,true")));
}
