use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coordfeas"));
    c.env_remove("COORDFEAS_LOG");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SINGLE_UNICYCLE: &str = r#"{
  "vehicles": [{"kind": "unicycle", "initial": [0, 0, 0]}],
  "constraints": [],
  "sim": {"duration": DURATION, "step": 0.1, "integrator": "euler", "cruise": [1, 0]}
}"#;

#[test]
fn check_reports_feasible_shipped_scenarios() {
    for name in ["three_unicycles.json", "car_unicycle.json", "leader_follower_chain.json"] {
        let o = bin().arg("check").arg(scenario(name)).output().unwrap();
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(json.is_object());
    }
}

#[test]
fn check_flags_inconsistent_equalities() {
    let o = bin().arg("check").arg(scenario("pinned_constant_speed.json")).output().unwrap();
    assert_eq!(code(&o), 2);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["status"], "equality_inconsistent");
}

#[test]
fn run_flags_inconsistent_equalities() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(scenario("pinned_constant_speed.json"))
        .arg("--csv")
        .arg(dir.path().join("out.csv"))
        .arg("--report")
        .arg(dir.path().join("out.json"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "bad.json",
        r#"{"vehicles": [{"kind": "unicycle", "initial": [0, 0, "zero"]}], "constraints": []}"#,
    );
    let o = bin().arg("check").arg(&p).output().unwrap();
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("vehicles[0].initial"), "{err}");
}

#[test]
fn missing_parameter_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "car.json",
        r#"{"vehicles": [{"kind": "car_like", "initial": [0, 0, 0, 0]}], "constraints": []}"#,
    );
    let o = bin().arg("check").arg(&p).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.l"));
}

#[test]
fn missing_file_is_an_input_error() {
    let o = bin().arg("check").arg("/nonexistent/scenario.json").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&bin().output().unwrap()), 1);
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 1);
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
}

#[test]
fn zero_duration_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.json", &SINGLE_UNICYCLE.replace("DURATION", "0"));
    let csv = dir.path().join("out.csv");
    let o = bin().arg("run").arg(&p).arg("--csv").arg(&csv).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,x_1,y_1,theta_1,u_1_1,u_1_2,w_1,w_2");
    // the report goes to stdout when the CSV goes to a file
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["records"], 1);
}

#[test]
fn csv_to_stdout_sends_report_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.json", &SINGLE_UNICYCLE.replace("DURATION", "0.3"));
    let o = bin().arg("run").arg(&p).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    // Euler with unit forward speed from the origin
    assert!((rows[3][1] - 0.3).abs() < 1e-12);
    let report: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["status"], "completed");
    assert!(report["scenario_digest"].as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn output_paths_resolve_next_to_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let text = SINGLE_UNICYCLE
        .replace("DURATION", "0.2")
        .replace("\"constraints\": [],", "\"constraints\": [],\n  \"outputs\": {\"csv\": \"log.csv\", \"report\": \"report.json\"},");
    let p = write(dir.path(), "s.json", &text);
    let o = bin().arg("run").arg(&p).current_dir("/").output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv_text = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 4, "{csv_text}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["final_time"], 0.2);
}

#[test]
fn invalid_initial_state_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "s.json",
        r#"{
  "vehicles": [
    {"kind": "unicycle", "initial": [0, 0, 0]},
    {"kind": "unicycle", "initial": [-3, 0, 0]}
  ],
  "constraints": [{"type": "distance_eq", "i": 1, "j": 2, "params": {"d": 1}}]
}"#,
    );
    let o = bin().arg("run").arg(&p).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
}

#[test]
fn tree_chain_runs_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(scenario("leader_follower_chain.json"))
        .arg("--csv")
        .arg(dir.path().join("chain.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for m in report["metrics"]["distance"].as_array().unwrap() {
        assert!((m["min"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!((m["max"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn bench_passes_for_any_seed_and_flags_corruption() {
    for seed in ["20190101", "1", "987654321"] {
        let o = bin().args(["bench", "--seed", seed]).output().unwrap();
        assert_eq!(code(&o), 0);
        assert!(String::from_utf8_lossy(&o.stdout).ends_with("result: pass\n"));
    }
    let o = bin().args(["bench", "--corrupt"]).output().unwrap();
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stdout).ends_with("result: mismatch\n"));
}
