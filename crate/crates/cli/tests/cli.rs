use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn loclace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loclace"))
        .args(args)
        .env_remove("LOCLACE_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_sample(dir: &Path, name: &str, values: &[f64]) -> String {
    let path = dir.join(name);
    let body: String = std::iter::once("x".to_string())
        .chain(values.iter().map(|v| v.to_string()))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SAMPLE: [f64; 12] = [
    0.31, -1.20, 0.84, 2.05, -0.47, 0.12, 1.33, -0.91, 0.58, -0.05, 1.71, -1.64,
];

#[test]
fn info_reports_fisher_information() {
    let v = json(&loclace(&["info", "--family", "gaussian"]));
    assert_eq!(v["family"], "gaussian");
    assert!((v["fisher_info"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let v = json(&loclace(&["info", "--family", "symbeta:2", "--n", "40"]));
    assert_eq!(v["fisher_info"], "inf");
    let v = json(&loclace(&["info", "--family", "logistic", "--n", "40"]));
    assert_eq!(v["tuning"]["stone/optimal"]["d"], 10.0);
}

#[test]
fn estimate_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_sample(dir.path(), "x.csv", &SAMPLE);
    let v = json(&loclace(&["estimate", &path]));
    let theta = v["theta"].as_f64().unwrap();
    assert!(v["ci_low"].as_f64().unwrap() <= theta && theta <= v["ci_high"].as_f64().unwrap());
    assert_eq!(v["xi"], "inf");
    assert_eq!(v["n"], 12);

    let shifted: Vec<f64> = SAMPLE.iter().map(|v| v + 10.0).collect();
    let moved = write_sample(dir.path(), "y.csv", &shifted);
    let w = json(&loclace(&["estimate", &moved]));
    assert!((w["theta"].as_f64().unwrap() - theta - 10.0).abs() < 1e-9);

    for method in ["stone", "beran"] {
        let v = json(&loclace(&["estimate", &path, "--method", method]));
        assert!(v["theta"].as_f64().unwrap().is_finite());
    }
    let v = json(&loclace(&["estimate", &path, "--score", "geo-sym", "--eta", "0.05"]));
    assert_eq!(v["eta"], 0.05);
}

#[test]
fn mle_and_fit_print_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_sample(dir.path(), "x.csv", &SAMPLE);
    let v = json(&loclace(&["mle", &path]));
    let theta = v["theta"].as_f64().unwrap();
    assert!((-1.64..=2.05).contains(&theta));
    assert!(v["criterion"].as_f64().unwrap().is_finite());
    let v = json(&loclace(&["fit", &path]));
    assert_eq!(v["knots"].as_array().unwrap().len(), v["logvals"].as_array().unwrap().len());
    let v = json(&loclace(&["fit", &path, "--center", "0.1"]));
    assert!(v["knots"].is_array());
}

#[test]
fn degenerate_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_sample(dir.path(), "one.csv", &[3.5]);
    let out = loclace(&["estimate", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degenerate"), "{err}");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x\n1.0\nabc\n").unwrap();
    let out = loclace(&["estimate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(loclace(&["estimate"]).status.code(), Some(2));
    assert_eq!(loclace(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(loclace(&["info"]).status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{
            "families": ["laplace", "symbeta:4.5"],
            "sample_sizes": [30],
            "replications": 20,
            "estimators": [
                {"type": "onestep", "score": "sym_smoothed"},
                {"type": "stone", "regime": "optimal"},
                {"type": "median"}
            ],
            "seed": 11
        }"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "3")] {
        let out_dir = dir.path().join(run);
        let v = json(&loclace(&[
            "simulate",
            cfg.to_str().unwrap(),
            "-o",
            out_dir.to_str().unwrap(),
            "--workers",
            workers,
        ]));
        assert_eq!(v["rows"], 6);
        for name in ["report.json", "fig_efficiency.csv", "fig_coverage.csv"] {
            assert!(out_dir.join(name).exists());
        }
        reports.push(fs::read(out_dir.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let out = loclace(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
}
