use std::fs;
use std::process::{Command, Output};

use tempfile::tempdir;

fn cohomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohomo"))
        .args(args)
        .env_remove("COHOMOLIB_THREADS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

#[test]
fn cf_reports_exact_convergents_and_passes() {
    let out = cohomo(&["cf", "--alpha", "golden", "--depth", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["command"], "cf");
    assert_eq!(v["config"]["depth"], 12);
    let q = v["result"]["q"].as_array().unwrap();
    assert_eq!(q.len(), 13);
    assert_eq!(q[12], "233");
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn unknown_config_key_is_rejected_with_exit_4() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    fs::write(&p, r#"{"alpha": "golden", "bogus": 1}"#).unwrap();
    let out = cohomo(&["cf", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus"), "diagnostic names the field: {err}");
}

#[test]
fn empty_config_file_is_rejected_with_exit_4() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("empty.json");
    fs::write(&p, "").unwrap();
    let out = cohomo(&["cf", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn flags_override_config_file_fields() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    fs::write(&p, r#"{"alpha": "golden", "depth": 5}"#).unwrap();
    let out = cohomo(&["cf", "--config", p.to_str().unwrap(), "--depth", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["config"]["depth"], 7);
    assert_eq!(v["result"]["depth"], 7);
}

#[test]
fn thread_cap_is_validated_and_echoed() {
    let bad = Command::new(env!("CARGO_BIN_EXE_cohomo"))
        .args(["cf", "--depth", "3"])
        .env("COHOMOLIB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(4));

    let good = Command::new(env!("CARGO_BIN_EXE_cohomo"))
        .args(["cf", "--depth", "3"])
        .env("COHOMOLIB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(good.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&good.stdout).unwrap();
    assert_eq!(v["threads"], 2);
}

#[test]
fn dk_csv_is_rfc4180_and_reruns_are_byte_identical() {
    let dir = tempdir().unwrap();
    let c1 = dir.path().join("a.csv");
    let c2 = dir.path().join("b.csv");
    let args = |csv: &str| {
        vec![
            "dk".to_string(),
            "rotation:rho=golden".to_string(),
            "--phi".to_string(),
            "cos".to_string(),
            "--level-budget".to_string(),
            "200".to_string(),
            "--grid".to_string(),
            "256".to_string(),
            "--csv".to_string(),
            csv.to_string(),
        ]
    };
    let run = |csv: &std::path::Path| {
        Command::new(env!("CARGO_BIN_EXE_cohomo"))
            .args(args(csv.to_str().unwrap()))
            .env_remove("COHOMOLIB_THREADS")
            .output()
            .unwrap()
    };
    let o1 = run(&c1);
    let o2 = run(&c2);
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o1.stdout, o2.stdout, "JSON reports differ between runs");
    let b1 = fs::read(&c1).unwrap();
    let b2 = fs::read(&c2).unwrap();
    assert_eq!(b1, b2, "CSV bytes differ between runs");
    let text = String::from_utf8(b1).unwrap();
    assert!(text.starts_with("n,q_n,sup_dev,var_bound,slack\r\n"));
    assert!(text.ends_with("\r\n"));
}

#[test]
fn solve_rotation_meets_residual_at_golden() {
    let out = cohomo(&["solve-rotation", "--alpha", "golden", "--psi", "cos", "--modes", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let res = v["result"]["residual_c0"].as_f64().unwrap();
    assert!(res < 1e-10, "residual {res}");
}

#[test]
fn coboundary_explicit_level_certifies() {
    let out = cohomo(&[
        "coboundary",
        "rotation:rho=golden",
        "--phi",
        "cos",
        "--r",
        "11",
        "--levels",
        "4",
        "--epsilon",
        "1e9",
        "--budget-qn",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let certs = v["result"]["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 1);
    assert_eq!(certs[0]["passed"], true);
    assert!(certs[0]["j_vanish_sup"].as_f64().unwrap() < 1e-9);
}

#[test]
fn malformed_family_spec_exits_4() {
    let out = cohomo(&["map", "nope:a=1"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn over_budget_level_exits_3() {
    let out = cohomo(&[
        "dk",
        "rotation:rho=golden",
        "--phi",
        "cos",
        "--levels",
        "30",
        "--level-budget",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failed_check_exits_2_with_full_report() {
    // An impossible residual tolerance turns the solve's success into a
    // failed verdict; the report must still be complete on stdout.
    let dir = tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    fs::write(&p, r#"{"residual_tol": 1e-30, "modes": 8}"#).unwrap();
    let out = cohomo(&["solve-rotation", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json_of(&out);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["passed"] == false));
    assert!(v["result"]["residual_c0"].is_f64());
}

#[test]
fn herman_decay_holds_on_tuned_arnold() {
    let out = cohomo(&["herman", "arnold:eps=0.5,rho=golden", "--budget", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let rows = v["result"]["levels"].as_array().unwrap();
    let last = rows.last().unwrap();
    assert!(last["sup_log_df"].as_f64().unwrap() < 0.01);
}
