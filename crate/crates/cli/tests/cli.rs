use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, body).unwrap();
    p
}

fn run(scenario: &Path, out: &Path) -> Output {
    bin().args(["run", "--scenario"]).arg(scenario).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

const ROUND: &str = r#"{
  "schema_version": 1,
  "name": "round",
  "model": "su2",
  "g0": [1.0, 1.0, 1.0],
  "controls": { "t_end": "until_singularity" },
  "tasks": [
    { "task": "flow" },
    { "task": "classify" },
    { "task": "decay", "omega": 0.0 }
  ]
}"#;

#[test]
fn validate_accepts_well_formed_scenario() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(d.path(), "round", ROUND);
    let o = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).is_empty());
}

#[test]
fn validate_rejects_pinching_on_nil() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(
        d.path(),
        "nil",
        r#"{"schema_version": 1, "name": "nil", "model": "nil", "g0": [1, 1, 1],
            "tasks": [{"task": "flow"}, {"task": "pinching", "epsilon": 0.5}]}"#,
    );
    let o = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pinching precondition unsatisfiable"), "{}", stderr(&o));
}

#[test]
fn validate_rejects_degenerate_collapse_threshold() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(
        d.path(),
        "c",
        r#"{"schema_version": 1, "name": "c", "model": "abelian", "g0": [1, 1, 1],
            "tasks": [{"task": "collapse", "eps0": 5}]}"#,
    );
    let o = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ε₀ ≥ 4π/3 degenerate"), "{}", stderr(&o));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(d.path(), "bad", "{\n  \"schema_version\": 1,\n  \"name\": \"x\",\n  \"model\": \"su3\"\n}");
    let o = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn strict_makes_warnings_fatal() {
    let d = tempfile::tempdir().unwrap();
    let body = r#"{"schema_version": 1, "name": "w", "model": "abelian", "g0": [1, 1, 1],
        "tasks": [{"task": "rvol", "background": {"kind": "static_flat", "dim": 1}, "taus": [1.0],
                   "quadrature": {"cutoff": 3.0}}]}"#;
    let p = write_scenario(d.path(), "w", body);
    let lax = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(lax.status.code(), Some(0));
    assert!(stderr(&lax).contains("warning"));
    let strict = bin().args(["validate", "--strict", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn missing_scenario_is_io_error() {
    let o = bin().args(["validate", "--scenario", "/nonexistent/scenario.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn abelian_run_reports_no_singularity() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(
        d.path(),
        "abelian",
        r#"{"schema_version": 1, "name": "abelian", "model": "abelian", "g0": [1, 1, 1],
            "controls": {"t_end": 5.0}, "tasks": [{"task": "flow"}, {"task": "classify"}]}"#,
    );
    let out = d.path().join("out");
    let o = run(&p, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let verdict = read_json(&out.join("01-classify.json"));
    assert_eq!(verdict["kind"], "NoSingularityInWindow");
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["tasks"].as_array().unwrap().len(), 2);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f["path"] == "01-classify.json"));
}

#[test]
fn round_run_and_report() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(d.path(), "round", ROUND);
    let out = d.path().join("out");
    let o = run(&p, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let verdict = read_json(&out.join("01-classify.json"));
    assert_eq!(verdict["kind"], "TypeI");
    let stat = verdict["statistic"].as_f64().unwrap();
    assert!((stat - 3f64.sqrt() / 2.0).abs() < 1e-4, "{stat}");
    for f in ["00-flow.csv", "00-flow.json", "00-flow-rm.svg", "00-flow-fsigma.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let svg = fs::read_to_string(out.join("00-flow-fsigma.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));

    let r = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let text = stdout(&r);
    assert!(text.contains("TypeI"), "{text}");
    assert!(text.contains("decay ratio 0.000000"), "{text}");

    // tampering with any listed output breaks the report
    let csv = out.join("00-flow.csv");
    let mut bytes = fs::read(&csv).unwrap();
    bytes.push(b'\n');
    fs::write(&csv, bytes).unwrap();
    let r = bin().arg("report").arg(out.join("manifest.json")).output().unwrap();
    assert_ne!(r.status.code(), Some(0));
    assert!(stderr(&r).contains("checksum mismatch"), "{}", stderr(&r));
}

#[test]
fn flat_rvol_run_is_constant() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(
        d.path(),
        "flat",
        r#"{"schema_version": 1, "name": "flat", "model": "abelian", "g0": [1, 1, 1],
            "tasks": [{"task": "rvol", "background": {"kind": "static_flat", "dim": 3},
                       "taus": [0.5, 1.0, 2.0], "quadrature": {}}]}"#,
    );
    let out = d.path().join("out");
    let o = run(&p, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("00-rvol.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,value,error,truncated_rays"));
    let exact = 8.0 * std::f64::consts::PI.powf(1.5);
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    for v in values {
        assert!((v / exact - 1.0).abs() < 1e-2, "{v}");
    }
    let r = bin().arg("report").arg(&out).output().unwrap();
    assert!(stdout(&r).contains("constancy pass"), "{}", stdout(&r));
}

#[test]
fn failing_task_does_not_disturb_others() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(
        d.path(),
        "iso",
        r#"{"schema_version": 1, "name": "iso", "model": "su2", "g0": [1, 1, 1],
            "controls": {"t_end": "until_singularity"},
            "tasks": [{"task": "flow"}, {"task": "noncollapse", "t0": 0.3, "r": 0.1, "kappa": 0.1},
                      {"task": "classify"}]}"#,
    );
    let out = d.path().join("out");
    let o = run(&p, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let m = read_json(&out.join("manifest.json"));
    let tasks = m["tasks"].as_array().unwrap();
    assert_eq!(tasks[1]["status"], "failed");
    assert!(tasks[1]["error"].as_str().is_some());
    assert_eq!(tasks[0]["status"], "ok");
    assert_eq!(tasks[2]["status"], "ok");
    assert!(!out.join("01-noncollapse.json").exists());
    assert_eq!(read_json(&out.join("02-classify.json"))["kind"], "TypeI");
    let r = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(stdout(&r).contains("FAILED"));
}

#[test]
fn rerun_reproduces_checksums() {
    let d = tempfile::tempdir().unwrap();
    let p = write_scenario(d.path(), "round", ROUND);
    let a = d.path().join("a");
    let b = d.path().join("b");
    assert_eq!(run(&p, &a).status.code(), Some(0));
    let o = bin().args(["run", "--jobs", "1", "--scenario"]).arg(&p).arg("--out").arg(&b).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ma = read_json(&a.join("manifest.json"));
    let mb = read_json(&b.join("manifest.json"));
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(ma["scenario_hash"], mb["scenario_hash"]);
}
