use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use qinterp::sample::round_trip;
use qinterp::MapClass;
use qinterp_cli::{ProblemFile, WireMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn problems_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn problem(name: &str) -> String {
    problems_dir().join(name).to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).expect("stdout is JSON")
    }
}

fn qinterp(args: &[&str], stdin: Option<&str>) -> Run {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qinterp"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    if let Some(text) = stdin {
        child
            .stdin
            .take()
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn two_qubit_example_is_infeasible_by_trace_norm() {
    let r = qinterp(&["decide", &problem("two_qubit_infeasible.json")], None);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let j = r.json();
    assert_eq!(j["verdict"], "INFEASIBLE");
    assert_eq!(j["route"], "screen-trace_norm");
    assert!(j["evidence"]
        .as_str()
        .unwrap()
        .contains("trace_norm failed"));
}

#[test]
fn identity_instance_emits_a_channel_that_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let r = qinterp(&["decide", &problem("identity.json")], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["verdict"], "FEASIBLE");
    let cert = write_temp(&dir, "cert.json", &r.stdout);
    let v = qinterp(&["verify", &problem("identity.json"), &cert], None);
    assert_eq!(v.code, 0, "{}", v.stderr);
    assert_eq!(v.json()["valid"], true);

    let bare = serde_json::to_string(&r.json()["channel"]).unwrap();
    let bare = write_temp(&dir, "channel.json", &bare);
    assert_eq!(
        qinterp(&["verify", &problem("identity.json"), &bare], None).code,
        0
    );
}

#[test]
fn perturbed_kraus_operators_fail_verification_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let r = qinterp(&["decide", &problem("identity.json")], None);
    let mut cert = r.json();
    let entry = &mut cert["channel"]["operators"][0]["data"][0][0];
    *entry = Value::from(entry.as_f64().unwrap() + 1e-3);
    let path = write_temp(&dir, "bad.json", &cert.to_string());
    let v = qinterp(&["verify", &problem("identity.json"), &path], None);
    assert_eq!(v.code, 1);
    let failed = v.json()["failed"].clone();
    assert!(
        failed
            .as_array()
            .unwrap()
            .iter()
            .any(|f| f == "trace_preserving"),
        "{failed}"
    );
    assert!(v.stderr.contains("trace_preserving"));
}

#[test]
fn wrong_channel_dimensions_are_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let ch = serde_json::json!({
        "in_dim": 3,
        "out_dim": 3,
        "operators": [WireMatrix::from_matrix(&qinterp::linalg::identity(3))],
    });
    let path = write_temp(&dir, "ch.json", &ch.to_string());
    let v = qinterp(&["verify", &problem("identity.json"), &path], None);
    assert_eq!(v.code, 3);
    assert!(v.stdout.is_empty());
}

#[test]
fn malformed_matrices_are_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(problem("identity.json")).unwrap();
    let mut file: Value = serde_json::from_str(&text).unwrap();
    file["inputs"][0]["rows"] = Value::from(3);
    let path = write_temp(&dir, "bad.json", &file.to_string());
    let r = qinterp(&["decide", &path], None);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("entries"), "{}", r.stderr);
    assert_eq!(
        qinterp(&["decide", &write_temp(&dir, "junk.json", "{")], None).code,
        3
    );
    assert_eq!(
        qinterp(
            &["screen", &dir.path().join("missing.json").to_string_lossy()],
            None
        )
        .code,
        3
    );
}

#[test]
fn screen_reports_each_condition() {
    let r = qinterp(&["screen", &problem("two_qubit_infeasible.json")], None);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("FAIL"));
    assert_eq!(
        qinterp(&["screen", &problem("identity.json")], None).code,
        0
    );

    // Equal inputs, different targets: fidelity would have to drop.
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(problem("identity.json")).unwrap();
    let mut file: Value = serde_json::from_str(&text).unwrap();
    file["inputs"][1] = file["inputs"][0].clone();
    let path = write_temp(&dir, "fid.json", &file.to_string());
    let r = qinterp(&["screen", &path], None);
    assert_eq!(r.code, 1);
    let screens = r.json()["screens"].clone();
    let fid = screens
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["kind"] == "fidelity")
        .unwrap();
    assert_eq!(fid["passed"], false);
}

#[test]
fn standard_input_and_flags() {
    let text = std::fs::read_to_string(problem("pure_cp.json")).unwrap();
    let r = qinterp(&["decide", "-"], Some(&text));
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["route"], "pure-cp");
    let r = qinterp(&["decide", "--oracle", "--tol", "1e-8", "-"], Some(&text));
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["route"], "choi-oracle");
    assert_eq!(
        qinterp(&["decide", "--max-iter", "nope", "-"], Some(&text)).code,
        3
    );
}

#[test]
fn output_is_deterministic() {
    let a = qinterp(&["decide", &problem("pure_cp.json")], None);
    let b = qinterp(&["decide", &problem("pure_cp.json")], None);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn batch_mode_keeps_argument_order() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_temp(&dir, "bad.json", "[]");
    let files = [
        problem("identity.json"),
        problem("two_qubit_infeasible.json"),
        bad,
        problem("pure_cp.json"),
    ];
    let mut args = vec!["decide", "--jobs", "3"];
    args.extend(files.iter().map(String::as_str));
    let r = qinterp(&args, None);
    assert_eq!(r.code, 3);
    let entries = r.json();
    let codes: Vec<i64> = entries
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["exit_code"].as_i64().unwrap())
        .collect();
    assert_eq!(codes, [0, 1, 3, 0]);
    assert_eq!(entries[0]["path"], files[0].as_str());
    assert!(entries[2]["error"].is_string());
    assert_eq!(entries[3]["certificate"]["route"], "pure-cp");
}

#[test]
fn decided_certificates_always_verify() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    for (i, class) in MapClass::ALL.into_iter().enumerate() {
        let (p, _) = round_trip(&mut rng, class, 2, 3, 3);
        let path = write_temp(
            &dir,
            &format!("p{i}.json"),
            &serde_json::to_string(&ProblemFile::from_problem(&p)).unwrap(),
        );
        let r = qinterp(&["decide", &path], None);
        assert_eq!(r.code, 0, "{class}: {}", r.stdout);
        let cert = write_temp(&dir, &format!("c{i}.json"), &r.stdout);
        let v = qinterp(&["verify", &path, &cert], None);
        assert_eq!(v.code, 0, "{class}: {}", v.stdout);
    }
}
