use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_legendre-diff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn coeffs(v: &Value) -> Vec<f64> {
    v["coeffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn project_expression_recovers_cubic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let res = cli(&["project", "--input", "t*t*t", "--degree", "5", "--out", path_str(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let c = coeffs(&read_json(&out));
    assert_eq!(c.len(), 6);
    // t³ = sqrt(2/3)·(3/5)·φ₁ + sqrt(2/7)·(2/5)·φ₃
    assert!((c[1] - 0.6 * (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    assert!((c[3] - 0.4 * (2.0f64 / 7.0).sqrt()).abs() < 1e-14);
    for k in [0, 2, 4, 5] {
        assert!(c[k].abs() < 1e-14, "c[{k}] = {}", c[k]);
    }
}

#[test]
fn project_samples_file() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("samples.json");
    let out = dir.path().join("c.json");
    fs::write(&input, r#"{"t": [-1.0, 1.0], "f": [-1.0, 1.0]}"#).unwrap();
    let res = cli(&["project", "--input", path_str(&input), "--degree", "2", "--out", path_str(&out)]);
    assert!(res.status.success());
    let c = coeffs(&read_json(&out));
    assert!(c[0].abs() < 1e-15);
    assert!((c[1] - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
}

#[test]
fn project_numerical_failure_exits_3_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    // Odd rule size puts a node at t = 0.
    let res = cli(&["project", "--input", "1/t", "--degree", "3", "--rule-size", "65", "--out", path_str(&out)]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.exists());
}

#[test]
fn project_bad_expression_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let res = cli(&["project", "--input", "foo(t", "--degree", "3", "--out", path_str(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn differentiate_fixed_and_rule_levels() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    let out = dir.path().join("d.json");
    fs::write(&input, r#"{"coeffs": [0.0, 1.0, 0.0, 1.0]}"#).unwrap();

    let res = cli(&["differentiate", "--coeffs", path_str(&input), "--r", "1", "--N", "3", "--out", path_str(&out)]);
    assert!(res.status.success());
    let d = coeffs(&read_json(&out));
    // φ₁' = sqrt(3/2)·sqrt(2)·φ₀; φ₃' = 2·sqrt(7/2)·(sqrt(1/2)·φ₀ + sqrt(5/2)·φ₂)
    assert!((d[0] - (3f64.sqrt() + 7f64.sqrt())).abs() < 1e-13);
    assert!(d[1].abs() < 1e-15);
    assert!((d[2] - 35f64.sqrt()).abs() < 1e-13);

    // (1e-4)^(-1/4) = 10 for mu = 4, p = 2, s = 2.
    let res = cli(&[
        "differentiate", "--coeffs", path_str(&input), "--r", "1", "--delta", "1e-4",
        "--mu", "4", "--p", "2", "--s", "2", "--out", path_str(&out),
    ]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("N = 10"));
}

#[test]
fn differentiate_validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    let out = dir.path().join("d.json");
    fs::write(&input, r#"{"coeffs": [0.0, 1.0]}"#).unwrap();
    // Noise level outside (0, 1).
    let res = cli(&[
        "differentiate", "--coeffs", path_str(&input), "--r", "1", "--delta", "1.5",
        "--mu", "4", "--p", "2", "--s", "2", "--out", path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    // r = 0 is not a derivative.
    let res = cli(&["differentiate", "--coeffs", path_str(&input), "--r", "0", "--N", "3", "--out", path_str(&out)]);
    assert_eq!(res.status.code(), Some(2));
    // Neither N nor delta.
    let res = cli(&["differentiate", "--coeffs", path_str(&input), "--r", "1", "--out", path_str(&out)]);
    assert_eq!(res.status.code(), Some(2));
    // Non-finite coefficient.
    fs::write(&input, r#"{"coeffs": [0.0, "x"]}"#).unwrap();
    let res = cli(&["differentiate", "--coeffs", path_str(&input), "--r", "1", "--N", "3", "--out", path_str(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn differentiate_below_order_gives_zero_series() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    let out = dir.path().join("d.json");
    fs::write(&input, r#"{"coeffs": [1.0, 1.0, 1.0]}"#).unwrap();
    let res = cli(&["differentiate", "--coeffs", path_str(&input), "--r", "2", "--N", "1", "--out", path_str(&out)]);
    assert!(res.status.success());
    assert!(coeffs(&read_json(&out)).iter().all(|&c| c == 0.0));
}

#[test]
fn experiment_then_rates() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("cfg.json");
    let table = dir.path().join("table.csv");
    let fit = dir.path().join("fit.json");
    fs::write(
        &config,
        format!(
            r#"{{"wiener": {{"s": 2, "mu": 4}}, "p": 2, "q_list": [2, "inf"],
                "delta_list": [1e-2, 1e-3, 1e-4, 1e-5], "output": {:?}}}"#,
            path_str(&table)
        ),
    )
    .unwrap();

    let res = cli(&["experiment", "--config", path_str(&config)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(&table).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "delta,N,count,truncation_q2,propagation_q2,total_q2,truncation_qinf,propagation_qinf,total_qinf"
    );
    assert_eq!(lines.count(), 4);

    let res = cli(&[
        "rates", "--results", path_str(&table), "--q", "2", "--config", path_str(&config), "--out", path_str(&fit),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v = read_json(&fit);
    assert!(v["slope"].as_f64().unwrap() > 0.0);
    assert!(v["r_squared"].as_f64().unwrap() <= 1.0);
    let theta = v["theoretical"].as_f64().unwrap();
    assert!((theta - 0.5).abs() < 1e-12, "{theta}");

    // Without a config the prediction is unknown.
    let res = cli(&["rates", "--results", path_str(&table), "--q", "inf", "--out", path_str(&fit)]);
    assert!(res.status.success());
    assert!(read_json(&fit)["theoretical"].is_null());
}

#[test]
fn experiment_rejects_invalid_config() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("cfg.json");
    let table = dir.path().join("table.csv");
    fs::write(&config, r#"{"wiener": {"s": 2, "mu": 4}, "p": 2, "delta_list": [2.0]}"#).unwrap();
    let res = cli(&["experiment", "--config", path_str(&config), "--out", path_str(&table)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!table.exists());
}

#[test]
fn rates_rejects_short_table() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("table.csv");
    let fit = dir.path().join("fit.json");
    fs::write(
        &table,
        "delta,N,count,truncation_q2,propagation_q2,total_q2\n1e-2,4,4,1e-1,1e-2,1e-1\n1e-3,6,6,1e-2,1e-3,1e-2\n",
    )
    .unwrap();
    let res = cli(&["rates", "--results", path_str(&table), "--q", "2", "--out", path_str(&fit)]);
    assert_eq!(res.status.code(), Some(2));
}
