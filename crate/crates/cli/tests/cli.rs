use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sphereflow");

const CAP: &str = "\
# small hemisphere cap run
d = 3
D = 2
n = 9
scheme = glhf
lambda = 100
t_end = 0.002
stride = 5
scenario = cap
theta0 = 0.9
diagnostics = energy_check, one_sided, penalty
";

fn sphereflow(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_manifest_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cap.cfg", CAP);
    let out = tmp.path().join("out");
    let o = sphereflow(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    let steps = std::fs::read_to_string(out.join("steps.ndjson")).unwrap();
    let first: serde_json::Value = serde_json::from_str(steps.lines().next().unwrap()).unwrap();
    assert!(first.get("dirichlet").is_some());
    assert!(out.join("snapshots/field_00000.txt").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["penalty"]["penalty_integral"].as_f64().unwrap() >= 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cap.cfg", CAP);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        assert_eq!(sphereflow(&["run", "--config", &cfg, "--out", d.to_str().unwrap()]).status.code(), Some(0));
    }
    for f in ["steps.ndjson", "snapshots/field_00000.txt", "snapshots/field_00001.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn dt_above_cfl_exits_2_and_names_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.cfg", &format!("{CAP}dt = 0.1\n"));
    let o = sphereflow(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bound"), "{err}");
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.cfg", "scenario = cap\nfoo = 1\n");
    let o = sphereflow(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(sphereflow(&["run"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cap.cfg", CAP);
    let blocker = write(tmp.path(), "file", "not a directory");
    let out = format!("{blocker}/out");
    assert_eq!(sphereflow(&["run", "--config", &cfg, "--out", &out]).status.code(), Some(3));
    let missing = tmp.path().join("missing.cfg");
    let o = sphereflow(&["run", "--config", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn diagnose_reads_trace_and_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cap.cfg", CAP);
    let trace = tmp.path().join("trace");
    assert_eq!(sphereflow(&["run", "--config", &cfg, "--out", trace.to_str().unwrap()]).status.code(), Some(0));
    let anchors = write(
        tmp.path(),
        "anchors.txt",
        "kind=density t0=0.002 x0=0,0,0 radii=0.25,0.5\nkind=reverse_poincare t0=0.002 x0=0,0,0 radii=0.25\n",
    );
    let out = tmp.path().join("diag");
    let o = sphereflow(&[
        "diagnose",
        "--trace",
        trace.to_str().unwrap(),
        "--anchors",
        &anchors,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = std::fs::read_to_string(out.join("reports.ndjson")).unwrap();
    assert_eq!(reports.lines().count(), 3);
    let rec: serde_json::Value = serde_json::from_str(reports.lines().next().unwrap()).unwrap();
    assert_eq!(rec["kind"], "density");
    assert!(rec["fitted_C"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_writes_one_line_per_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cap.cfg", CAP);
    let out = tmp.path().join("sweep");
    let o = sphereflow(&["sweep", "--config", &cfg, "--lambda", "1e2,1e3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(out.join("sweep.ndjson")).unwrap();
    let recs: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 2);
    assert!(recs[1]["l2_distance"].as_f64().unwrap() <= recs[0]["l2_distance"].as_f64().unwrap());
}
