use std::path::Path;
use std::process::{Command, Output};

fn batchsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchsel"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    batchsel(&args)
}

const CC: &str = r#"{"experiment": "cc", "trials": 2, "n_grid": [100, 300], "n_test": 100,
    "cc": {"state_count": 6, "action_count": 3, "hidden_dims": [2, 5]}}"#;

#[test]
fn cc_run_writes_expected_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cc.json", CC);
    let out = dir.path().join("out");
    let o = run_into(&cfg, &out, &["--audit"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("n,method,trial,regret"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 3);
    let mut methods: Vec<&str> = rows.iter().map(|r| r[1]).collect();
    methods.sort();
    methods.dedup();
    assert_eq!(methods, ["cc", "class_2", "class_5"]);
    for r in &rows {
        let regret: f64 = r[3].parse().unwrap();
        assert!(regret >= 0.0 && regret.is_finite());
    }

    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().next(), Some("n,method,mean_regret,stderr"));
    assert_eq!(agg.lines().count(), 1 + 2 * 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.is_array() || report.is_object());
}

#[test]
fn results_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cc.json", CC);
    let read = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = run_into(&cfg, &out, &["--threads", threads, "--seed", "9"]);
        assert!(o.status.success());
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let one = read("1");
    assert_eq!(one, read("8"));
    assert_eq!(one, read("1"));
}

#[test]
fn lower_bound_run_reports_positive_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "lb.json",
        r#"{"experiment": "lower_bound", "trials": 40, "lower_bound": {"n1": [16, 256], "n2": [16]}}"#,
    );
    let out = dir.path().join("out");
    let o = run_into(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,n1,n2,trials,mean_regret_nu1,mean_regret_nu2,denominator,ratio")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 2);
    for r in rows {
        let ratio: f64 = r.split(',').nth(7).unwrap().parse().unwrap();
        assert!(ratio > 0.0, "{r}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let unknown = write_config(dir.path(), "a.json", r#"{"experiment": "cc", "trails": 3}"#);
    assert_eq!(run_into(&unknown, &out, &[]).status.code(), Some(2));
    let bad_delta = write_config(dir.path(), "b.json", r#"{"experiment": "cc", "delta": 0.9}"#);
    let o = run_into(&bad_delta, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
    let ok = write_config(dir.path(), "c.json", CC);
    assert_eq!(run_into(&ok, &out, &["--threads", "0"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run_into(missing.to_str().unwrap(), &out, &[]).status.code(), Some(2));
}

#[test]
fn singular_fit_exits_with_three() {
    // λ = 0 with fewer rows than features leaves the covariance singular.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"experiment": "cc", "trials": 1, "n_grid": [3], "lambda": 0.0, "n_test": 10,
            "cc": {"state_count": 5, "action_count": 4, "hidden_dims": [20]}}"#,
    );
    let o = run_into(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
