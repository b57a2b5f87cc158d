use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockcount"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn bs_stationary_reports_rho() {
    let bs = model("bs.json");
    let v = json(&run(&[
        "stationary",
        "--model",
        &bs,
        "--sigma",
        "1",
        "--theta0",
        "0.5",
        "--theta1",
        "0.5",
    ]));
    let rho = v["diagnostics"]["rho"].as_f64().unwrap();
    assert!((rho - 0.38741836785998324).abs() < 1e-12);
    assert!(v["diagnostics"]["geometric_sup_distance"].as_f64().unwrap() < 1e-6);
    let p1 = v["pmf"][0].as_f64().unwrap();
    assert!((p1 - (1.0 - rho)).abs() < 1e-6);
    assert_eq!(v["model"], "BolthausenSznitman");
    assert_eq!(v["params"]["theta0"], 0.5);
    assert!(v["version"].is_string());

    let out = run(&[
        "stationary",
        "--model",
        &bs,
        "--theta0",
        "0.5",
        "--theta1",
        "0.5",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,p_n,a_n\n1,"));
}

#[test]
fn model_dispatch() {
    let cases = [
        ("kingman.json", "WrightFisher"),
        ("star.json", "Star"),
        ("beta31.json", "Beta31"),
        ("zero.json", "CrowKimura"),
        ("atoms.json", "General"),
    ];
    for (file, tag) in cases {
        let v = json(&run(&[
            "stationary",
            "--model",
            &model(file),
            "--theta0",
            "0.5",
            "--theta1",
            "0.5",
        ]));
        assert_eq!(v["model"], tag, "{file}");
        let total: f64 = v["pmf"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "{file}");
    }
    let v = json(&run(&[
        "stationary",
        "--model",
        "moran",
        "--N",
        "10",
        "--u0",
        "0.1",
        "--u1",
        "0.1",
    ]));
    assert_eq!(v["model"], "Moran");
    assert_eq!(v["pmf"].as_array().unwrap().len(), 10);
}

#[test]
fn simulate_is_deterministic() {
    let k = model("kingman.json");
    let args = [
        "simulate", "--model", &k, "--start", "5", "--events", "1e5", "--seed", "42",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&[
        "simulate", "--model", &k, "--start", "5", "--events", "1e5", "--seed", "43",
    ]);
    assert_ne!(a.stdout, c.stdout);
    let v = json(&a);
    assert_eq!(v["n_jumps"], 100000);
    assert_eq!(v["rng"], "ChaCha12");
}

#[test]
fn moments_and_geom_check() {
    let zero = model("zero.json");
    let v = json(&run(&[
        "moments", "--model", &zero, "--theta0", "1", "--theta1", "1", "--n-max", "5",
    ]));
    let q = (3.0 - 5f64.sqrt()) / 2.0;
    for (n, w) in v["w"].as_array().unwrap().iter().enumerate() {
        assert!((w.as_f64().unwrap() - q.powi(n as i32)).abs() < 1e-10);
    }
    let v = json(&run(&[
        "geom-check",
        "--model",
        &model("bs.json"),
        "--theta0",
        "0.5",
        "--theta1",
        "0.5",
    ]));
    assert_eq!(v["report"]["passed"], true);
    let v = json(&run(&[
        "geom-check",
        "--model",
        &model("kingman.json"),
        "--theta0",
        "0.5",
        "--theta1",
        "0.5",
    ]));
    assert_eq!(v["report"]["passed"], false);
}

#[test]
fn dual_quantities() {
    let v = json(&run(&[
        "dual",
        "--model",
        "moran",
        "--N",
        "10",
        "--s",
        "0.5",
        "--what",
        "moran-fixation",
        "--k",
        "10",
    ]));
    assert!((v["result"]["fixation"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    let v = json(&run(&[
        "dual",
        "--model",
        &model("bs.json"),
        "--what",
        "bs-absorption",
        "--x",
        "0",
    ]));
    assert!((v["result"]["absorption"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    let v = json(&run(&[
        "dual",
        "--model",
        &model("bs.json"),
        "--theta0",
        "1",
        "--theta1",
        "1",
        "--what",
        "w-generating",
        "--points",
        "4",
    ]));
    assert_eq!(v["result"]["values"].as_array().unwrap().len(), 4);
}

#[test]
fn validate_quick_passes() {
    let out = run(&["validate", "--suite", "quick"]);
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
}

#[test]
fn spec_errors_exit_two() {
    assert_eq!(
        run(&["stationary", "--model", "missing.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["stationary", "--model", "moran", "--N", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["stationary", "--model", &model("bs.json"), "--sigma", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["moments", "--model", "moran"]).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--model", "moran", "--events", "2.5"])
            .status
            .code(),
        Some(2)
    );
    let zero = model("zero.json");
    assert_eq!(
        run(&["stationary", "--model", &zero, "--theta1", "1"])
            .status
            .code(),
        Some(2)
    );

    let out = run(&[
        "--json-errors",
        "stationary",
        "--model",
        "moran",
        "--N",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "spec");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn malformed_measure_file() {
    let dir = std::env::temp_dir().join(format!("blockcount-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"m0": -1, "interior": {"type": "zero"}}"#).unwrap();
    assert_eq!(
        run(&["stationary", "--model", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(
        run(&["stationary", "--model", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let out = dir.join("out.csv");
    let status = run(&[
        "stationary",
        "--model",
        &model("zero.json"),
        "--theta0",
        "1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("n,p_n"));
    std::fs::remove_dir_all(&dir).ok();
}
