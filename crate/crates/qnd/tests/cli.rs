//! End-to-end checks of the `qnd` binary: exit codes, file artifacts, and
//! output determinism.

use std::path::Path;
use std::process::{Command, Output};

fn qnd(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qnd"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_plan(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_plan_prints_joint_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out_json = dir.path().join("out.json");
    let plan = write_plan(
        dir.path(),
        "dplus.qnd",
        &format!(
            "signal D+\nmeter dprime\neta 1/3\nrun\noutput json {}\n",
            out_json.display()
        ),
    );
    let output = qnd(&["run", &plan], &[]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("P_HH = 0.5"), "stdout:\n{stdout}");
    assert!(stdout.contains("P_VV = 0.5"));
    assert!(stdout.contains("F_M = 1"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_json).unwrap()).unwrap();
    assert_eq!(json["input"], "D+");
    assert_eq!(json["joint"]["p_hh"], serde_json::json!(0.5));
    assert_eq!(json["F_QND"], serde_json::json!(1.0));
    assert_eq!(json["success_probability"], serde_json::json!(0.25));
}

#[test]
fn run_plan_with_full_reflectivity() {
    // at eta = 1 the splitter is a bare mirror: both photons keep their arms
    // and every run heralds
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), "mirror.qnd", "signal H\nmeter dprime\neta 1\nrun\n");
    let output = qnd(&["run", &plan], &[]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("success probability: 1"),
        "stdout:\n{stdout}"
    );
    assert!(stdout.contains("joint distribution"));
}

#[test]
fn malformed_plan_exits_one_with_positions() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), "bad.qnd", "signal Q\nrun\n");
    let output = qnd(&["run", &plan], &[]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("1:8"), "stderr:\n{stderr}");
    assert!(stderr.contains("D+"));
}

#[test]
fn missing_plan_file_exits_one() {
    let output = qnd(&["run", "/nonexistent/plan.qnd"], &[]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn zero_success_plan_exits_two() {
    // eta 0 swaps the H modes: an H signal with a V meter never coincides
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(
        dir.path(),
        "impossible.qnd",
        "signal H\nmeter state(0,1)\neta 0\nrun\n",
    );
    let output = qnd(&["run", &plan], &[]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("zero probability") || stderr.contains("success"));
}

#[test]
fn table_prints_six_inputs_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("table.json");
    let output = qnd(
        &["table", "--json", &json_path.display().to_string()],
        &[],
    );
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    for label in ["H", "V", "D+", "D-", "R+", "R-"] {
        assert!(stdout.contains(label));
    }
    assert!(stdout.contains("F_QSP average over the six inputs: 1"));
    assert!(stdout.contains("experiment (published reference)"));
    assert!(stdout.contains("0.97"));
    assert!(stdout.contains("0.81"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(json["inputs"].as_array().unwrap().len(), 6);
    assert_eq!(json["f_qsp_average"], serde_json::json!(1.0));
}

#[test]
fn raw_input_dist_flag_changes_superposition_fidelity() {
    let output = qnd(&["table", "--raw-input-dist"], &[]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    // without success weighting the D+ measurement fidelity drops below 1
    assert!(stdout.contains("0.933"), "stdout:\n{stdout}");
}

#[test]
fn sweep_writes_schema_and_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run_a = qnd(
        &["sweep", "--steps", "50", "--out", &a.display().to_string()],
        &[("QND_THREADS", "1")],
    );
    assert_eq!(run_a.status.code(), Some(0));
    let run_b = qnd(
        &["sweep", "--steps", "50", "--out", &b.display().to_string()],
        &[("QND_THREADS", "4")],
    );
    assert_eq!(run_b.status.code(), Some(0));

    let body_a = std::fs::read(&a).unwrap();
    let body_b = std::fs::read(&b).unwrap();
    assert_eq!(body_a, body_b, "CSV must not depend on parallelism");

    let text = String::from_utf8(body_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,K,V,K2plusV2,purity,p_success"));
    assert_eq!(lines.count(), 50);
    assert!(!text.contains('\r'));

    // K monotone nondecreasing and K²+V² pinned to 1 in the artifact
    let mut prev_k = f64::NEG_INFINITY;
    for line in text.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 6);
        assert!(fields[1] >= prev_k - 1e-12);
        prev_k = fields[1];
        assert!((fields[3] - 1.0).abs() < 1e-9);
    }

    let stdout = String::from_utf8(run_a.stdout).unwrap();
    assert!(stdout.contains("K^2 + V^2"));
}

#[test]
fn sweep_with_one_step_is_a_usage_error() {
    let output = qnd(&["sweep", "--steps", "1", "--out", "/tmp/unused.csv"], &[]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("at least 2"));
}

#[test]
fn densmat_endpoints_match_ideal_purities() {
    let off = qnd(&["densmat", "--alpha", "0"], &[]);
    assert_eq!(off.status.code(), Some(0));
    let stdout = String::from_utf8(off.stdout).unwrap();
    assert!(stdout.contains("purity: 1"), "stdout:\n{stdout}");
    assert!(stdout.contains("0.89"));

    let strong = qnd(&["densmat", "--alpha", "0.8660254037844386"], &[]);
    let stdout = String::from_utf8(strong.stdout).unwrap();
    assert!(stdout.contains("purity: 0.5"), "stdout:\n{stdout}");

    let bad = qnd(&["densmat", "--alpha", "1.5"], &[]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn plan_sweep_action_writes_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let plan = write_plan(
        dir.path(),
        "sweep.qnd",
        &format!(
            "balanced_loss on\nsweep alpha 0 .. 0.866025403784 steps 11\noutput csv {}\n",
            csv.display()
        ),
    );
    let output = qnd(&["run", &plan], &[]);
    assert_eq!(output.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("alpha,K,V,K2plusV2,purity,p_success\n"));
}

#[test]
fn plan_densmat_action_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("rho.json");
    let plan = write_plan(
        dir.path(),
        "densmat.qnd",
        &format!(
            "balanced_loss on\nmeter state(0,1)\ndensmat\noutput json {}\n",
            json_path.display()
        ),
    );
    let output = qnd(&["run", &plan], &[]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(json["purity"], serde_json::json!(1.0));
    assert_eq!(json["rho"][0][1]["re"], serde_json::json!(0.5));
    assert_eq!(json["rho"][0][1]["im"], serde_json::json!(0.0));
}
