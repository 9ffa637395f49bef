use std::path::Path;
use std::process::{Command, Output};

fn minimax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimax")).args(args).output().expect("spawn minimax")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_prints_one_record_and_repeats_exactly() {
    let args = ["solve", "--problem", "L5", "--algo", "coevp", "--fes", "3000", "--seed", "11"];
    let a = minimax(&args);
    let b = minimax(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let rec: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(rec["problem"], "L5");
    assert_eq!(rec["evaluations"], 3000);
    assert!(rec["regret"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn regret_at_known_optimum_is_tiny() {
    let o = minimax(&["regret", "--problem", "L1", "--x", "5,5,5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["regret"].as_f64().unwrap().abs() < 1e-6, "{v}");
}

#[test]
fn verify_succeeds() {
    let o = minimax(&["verify", "--points", "5", "--lambda", "20000"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn report_without_results_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = minimax(&["report", "--kind", "cd", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty slice"), "{}", stderr(&o));
}

#[test]
fn malformed_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problems = [\"L1\"\nbudgets = 7\n");
    let o = minimax(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "problems = [\"L9\"]\nbudgets = [1000]\n[[algorithms]]\nid = \"mmde\"\n");
    assert_eq!(minimax(&["run", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(minimax(&["solve", "--problem", "L1", "--algo", "reckless:NC"]).status.code(), Some(2));
}

#[test]
fn sweep_is_resumable_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "problems = [\"L1\", \"L6\"]\nbudgets = [2000]\nruns = 3\n[[algorithms]]\nid = \"reckless:CR\"\n[[algorithms]]\nid = \"coeva\"\n",
    );
    let out_s = out.to_str().unwrap();
    let first = minimax(&["run", "--config", &cfg, "--output-dir", out_s]);
    assert!(first.status.success(), "{}", stderr(&first));
    let results = std::fs::read_to_string(out.join("results.jsonl")).unwrap();
    assert_eq!(results.lines().count(), 12);

    let second = minimax(&["run", "--config", &cfg, "--output-dir", out_s]);
    assert!(second.status.success());
    assert_eq!(std::fs::read_to_string(out.join("results.jsonl")).unwrap(), results);
    let summary: serde_json::Value = serde_json::from_slice(&second.stdout).unwrap();
    assert_eq!(summary["completed"], 0);
    assert_eq!(summary["skipped"], 12);

    for kind in ["convergence", "cd"] {
        let o = minimax(&["report", "--kind", kind, "--output-dir", out_s]);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
    }
    assert!(out.join("reports").join("cd.json").exists());
    assert!(out.join("reports").join("convergence_L1.csv").exists());
}
