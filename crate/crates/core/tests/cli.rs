use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kplane::cli::{
    load_scenario, parse_scenario, report_to_json, run_scenario, CheckName, Scenario, ScenarioError,
    VerificationReport,
};
use kplane::manifold::Family;
use serde_json::Value;

fn kplane(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kplane")).args(args).env("KPLANE_THREADS", "2").output().expect("binary runs")
}

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SEGMENT: &str = r#"{
  "schema_version": 1,
  "name": "segment",
  "manifold": {"family": "segment", "origin": [0, 0], "direction": [1, 0], "domain": [-0.5, 0.5]},
  "plane": {"preset": "x_axis"},
  "checks": ["transversality_t", "identity"]
}"#;

fn strip_runtimes(mut v: Value) -> Value {
    for c in v["checks"].as_array_mut().unwrap() {
        c.as_object_mut().unwrap().remove("runtime_ms");
    }
    v
}

#[test]
fn passing_scenario_exits_zero_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "ok.json", SEGMENT);
    let out = kplane(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["overall_pass"], Value::Bool(true));
    assert_eq!(v["scenario"], "segment");
    assert_eq!(v["quadrature"]["order"], 64);
    assert_eq!(v["transversality"]["grid_res"], 201);
    assert_eq!(v["tolerances"]["identity"], 1e-3);
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // a tolerance no quadrature can meet
    let text = SEGMENT.replace("\"checks\"", "\"tolerances\": {\"identity\": 1e-300}, \"checks\"");
    let path = write(dir.path(), "tight.json", &text);
    let out = kplane(&["verify", path.to_str().unwrap(), "--format", "table"]);
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("rel_error"), "{table}");
    assert!(table.lines().any(|l| l.starts_with("identity") && l.contains("FAIL")), "{table}");
    assert!(table.contains("overall: FAIL"));
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.json", &SEGMENT.replace("\"checks\"", "\"quadratue\": {}, \"checks\""));
    let out = kplane(&["verify", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quadratue"));

    let broken = write(dir.path(), "broken.json", "{\"schema_version\": 1");
    assert_eq!(kplane(&["verify", broken.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(kplane(&["verify", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(kplane(&["verify", typo.to_str().unwrap(), "--format", "xml"]).status.code(), Some(2));
    assert_eq!(kplane(&["emit-example", "torus"]).status.code(), Some(2));
    assert_eq!(kplane(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_kplane"))
        .args(["list-families"])
        .env("KPLANE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_can_go_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "ok.json", SEGMENT);
    let report = dir.path().join("report.json");
    let out = kplane(&["verify", path.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: VerificationReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.overall_pass);
    assert!(r.checks.iter().all(|c| c.pass && c.outcome));
}

#[test]
fn command_line_overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "ok.json", SEGMENT);
    let out = kplane(&[
        "verify",
        path.to_str().unwrap(),
        "--quad-order",
        "48",
        "--trunc-radius",
        "25",
        "--grid-res",
        "101",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["quadrature"]["order"], 48);
    assert_eq!(v["quadrature"]["plane_trunc_radius"], 25.0);
    assert_eq!(v["transversality"]["grid_res"], 101);
}

#[test]
fn reports_are_deterministic() {
    let path = scenarios_dir().join("parabola_identity.json");
    let a = kplane(&["verify", path.to_str().unwrap()]);
    let b = kplane(&["verify", path.to_str().unwrap()]);
    let single = Command::new(env!("CARGO_BIN_EXE_kplane"))
        .args(["verify", path.to_str().unwrap()])
        .env("KPLANE_THREADS", "1")
        .output()
        .unwrap();
    let parse = |o: &Output| strip_runtimes(serde_json::from_slice(&o.stdout).unwrap());
    assert_eq!(parse(&a), parse(&b));
    assert_eq!(parse(&a), parse(&single));
}

#[test]
fn json_numbers_have_at_most_twelve_digits() {
    let s = load_scenario(&scenarios_dir().join("parabola_identity.json")).unwrap();
    let json = report_to_json(&run_scenario(&s).unwrap());
    let v: Value = serde_json::from_str(&json).unwrap();
    fn visit(v: &Value) {
        match v {
            Value::Number(n) => {
                let digits: String = n.to_string().split(['e', 'E']).next().unwrap().chars().filter(char::is_ascii_digit).collect();
                assert!(digits.trim_start_matches('0').trim_end_matches('0').len() <= 12, "{n}");
            }
            Value::Array(a) => a.iter().for_each(visit),
            Value::Object(o) => o.values().for_each(visit),
            _ => {}
        }
    }
    visit(&v);
}

#[test]
fn emitted_examples_round_trip_and_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = kplane(&["list-families"]);
    let listed: Vec<String> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| l.split_whitespace().next().unwrap().to_string()).collect();
    assert_eq!(listed, Family::BUILT_IN.iter().map(|f| f.as_str().to_string()).collect::<Vec<_>>());
    for family in listed {
        let out = kplane(&["emit-example", &family]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.to_canonical_json().trim_end(), text.trim_end());
        let path = write(dir.path(), &format!("{family}.json"), &text);
        let run = kplane(&["verify", path.to_str().unwrap()]);
        assert_eq!(run.status.code(), Some(0), "{family}: {}", String::from_utf8_lossy(&run.stdout));
    }
}

#[test]
fn empty_check_list_passes_with_no_records() {
    let s = parse_scenario(r#"{"schema_version": 1, "name": "nothing"}"#).unwrap();
    let r = run_scenario(&s).unwrap();
    assert!(r.overall_pass);
    assert!(r.checks.is_empty());
}

#[test]
fn check_errors_are_recorded_not_fatal() {
    // the identity refuses to run on two stacked caps; later checks still run
    let mut s = Scenario::example(Family::TwoCaps).unwrap();
    s.expect_fail.clear();
    let r = run_scenario(&s).unwrap();
    assert!(!r.overall_pass);
    let id = r.record(CheckName::Identity).unwrap();
    assert!(!id.pass && id.error.as_deref().unwrap().contains("transversality"));
    assert!(r.record(CheckName::GtViolation).unwrap().pass);
    assert!(r.record(CheckName::InterferenceModel).unwrap().pass);
}

#[test]
fn strict_schema_and_validation_paths() {
    let base: Value = serde_json::from_str(SEGMENT).unwrap();
    let cases: [(&str, Value); 5] = [
        ("/manifold/curvature", serde_json::json!(2.0)),
        ("/tolerances", serde_json::json!({"identiy": 0.1})),
        ("/checks", serde_json::json!(["identity", "idnetity"])),
        ("/plane/preset", serde_json::json!("x_axes")),
        ("/schema_version", serde_json::json!("one")),
    ];
    for (pointer, value) in cases {
        let mut v = base.clone();
        let (parent, key) = pointer.rsplit_once('/').unwrap();
        let target = if parent.is_empty() { &mut v } else { v.pointer_mut(parent).unwrap() };
        target[key] = value;
        let err = parse_scenario(&v.to_string()).unwrap_err();
        assert!(matches!(err, ScenarioError::Schema { .. }), "{pointer}: {err}");
    }

    let wrong_dim = SEGMENT.replace(r#""plane": {"preset": "x_axis"}"#, r#""plane": {"basis": [[1, 0, 0]]}"#);
    match parse_scenario(&wrong_dim).unwrap_err() {
        ScenarioError::Validation { path, .. } => assert_eq!(path, "plane.basis"),
        e => panic!("{e}"),
    }
    let no_plane = SEGMENT.replace(r#""plane": {"preset": "x_axis"},"#, "");
    match parse_scenario(&no_plane).unwrap_err() {
        ScenarioError::Validation { path, .. } => assert_eq!(path, "plane"),
        e => panic!("{e}"),
    }
    let stray = SEGMENT.replace("\"checks\"", "\"expect_fail\": [\"adjoint\"], \"checks\"");
    assert!(matches!(parse_scenario(&stray), Err(ScenarioError::Validation { .. })));
    let future = SEGMENT.replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(matches!(parse_scenario(&future), Err(ScenarioError::Validation { .. })));
}

#[test]
fn bundled_scenarios_pass_and_round_trip() {
    let mut names = Vec::new();
    for entry in fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        let s = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_scenario(&s.to_canonical_json()).unwrap(), s);
        let r = run_scenario(&s).unwrap();
        assert!(r.overall_pass, "{}: {:#?}", s.name, r.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        names.push(s.name);
    }
    assert_eq!(names.len(), 9);
}
