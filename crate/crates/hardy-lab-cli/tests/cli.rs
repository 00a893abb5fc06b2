use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hardy-lab"));
    cmd.args(args).env_remove("HARDY_LAB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn error_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    v["error"]["code"].as_str().expect("code").to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_signal(dir: &TempDir, space: &Path, seed: u64) -> PathBuf {
    let path = dir.path().join(format!("signal-{seed}.json"));
    let out = run(&["signal", s(space), "--seed", &seed.to_string(), "--out", s(&path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn space_commands_report_geometry() {
    let space = fixture("P8.space.json");
    let out = run(&["space", "validate", s(&space), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["space", "report", s(&space), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert!(v["c0"]["value"].as_f64().unwrap() >= 1.0);
    assert_eq!(v["c0"]["provenance"], "measured");
}

#[test]
fn broken_space_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"distances": [[0, 1], [2, 0]], "measure": [1, 1]}"#).unwrap();
    let out = run(&["space", "validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "INVALID_SPACE");

    std::fs::write(&bad, "{ not json").unwrap();
    let out = run(&["space", "report", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "JSON_PARSE");

    let out = run(&["space", "report", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "FILE_READ");
}

#[test]
fn spectral_diagnostics_pass_on_fixtures() {
    for name in ["P8", "C16"] {
        let out = run(&[
            "spectral",
            "diagnose",
            s(&fixture(&format!("{name}.space.json"))),
            s(&fixture(&format!("{name}.operator.json"))),
            "--json",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v = json_stdout(&out);
        assert!(v["markov_defect"]["value"].as_f64().unwrap() < 1e-10);
    }
    let out = run(&["spectral", "diagnose", s(&fixture("P8.space.json")), s(&fixture("P8.operator.json")), "--tgrid", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "BAD_TGRID");
}

#[test]
fn mismatched_operator_is_rejected() {
    let out = run(&["spectral", "diagnose", s(&fixture("P8.space.json")), s(&fixture("C16.operator.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn profile_build_then_check() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("phi.json");
    let out = run(&["profile", "build", "--m", "4", "--out", s(&path), "--u-max", "512"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["profile", "check", s(&path), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_stdout(&out)["passed"], true);

    let mut v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    v["samples"][40] = Value::from(v["samples"][40].as_f64().unwrap() + 1e-3);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    let out = run(&["profile", "check", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "PROFILE_CHECK_FAILED");

    let out = run(&["profile", "build", "--m", "3", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "BAD_PROFILE");
}

#[test]
fn maximal_kinds_and_csv() {
    let dir = TempDir::new().unwrap();
    let (space, op) = (fixture("C16.space.json"), fixture("C16.operator.json"));
    let signal = write_signal(&dir, &space, 3);
    let mut norms = Vec::new();
    for kind in ["radial", "nontangential", "tangential", "grand", "heat", "poisson", "hl"] {
        let csv = dir.path().join(format!("{kind}.csv"));
        let out = run(&["maximal", s(&space), s(&op), s(&signal), "--kind", kind, "--p", "0.8", "--json", "--csv", s(&csv)]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_stdout(&out);
        assert_eq!(v["values"]["value"].as_array().unwrap().len(), 16);
        norms.push((kind, v["lp_norm"]["value"].as_f64().unwrap()));
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next(), Some("point,value"));
        assert_eq!(text.lines().count(), 17);
    }
    assert!(norms[1].1 >= norms[0].1);
    let out = run(&["maximal", s(&space), s(&op), s(&signal), "--profile", "sinc"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "BAD_PROFILE");
    let short = dir.path().join("short.json");
    std::fs::write(&short, "[1.0, 2.0]").unwrap();
    let out = run(&["maximal", s(&space), s(&op), s(&short)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn whitney_cover_from_index_file() {
    let dir = TempDir::new().unwrap();
    let omega = dir.path().join("omega.json");
    std::fs::write(&omega, "[0, 1, 2, 3, 4, 5]").unwrap();
    let out = run(&["whitney", s(&fixture("P8.space.json")), "--omega", s(&omega), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["overlap_bound"]["provenance"], "paper-formula");
    std::fs::write(&omega, "[0, 1, 2, 3, 4, 5, 6, 7]").unwrap();
    let out = run(&["whitney", s(&fixture("P8.space.json")), "--omega", s(&omega)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "BAD_OMEGA");
}

#[test]
fn decompose_validate_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let (space, op) = (fixture("P8.space.json"), fixture("P8.operator.json"));
    let signal = write_signal(&dir, &space, 7);
    let decomp = dir.path().join("decomp.json");
    let levels = dir.path().join("levels.csv");
    let out = run(&["decompose", s(&space), s(&op), s(&signal), "--p", "0.8", "--out", s(&decomp), "--json", "--csv", s(&levels)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json_stdout(&out);
    assert_eq!(summary["partition_exact"], true);
    assert_eq!(summary["tau"]["provenance"], "fitted");

    let file: Value = serde_json::from_slice(&std::fs::read(&decomp).unwrap()).unwrap();
    for key in ["terms", "outstanding", "residual_norms", "budget", "c_sharp", "truncation_log"] {
        assert!(file.get(key).is_some(), "missing {key}");
    }
    let term = &file["terms"][0];
    for key in ["lambda", "ball", "a", "b"] {
        assert!(term.get(key).is_some(), "term missing {key}");
    }

    let out = run(&["validate-atoms", s(&decomp), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_stdout(&out)["failed"], 0);

    let atoms_csv = dir.path().join("atoms.csv");
    let out = run(&["report", s(&decomp), "--json", "--csv", s(&atoms_csv)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    for check in ["atoms_admissible", "partition_exact", "identity_within_tolerance", "budget_within_bound"] {
        assert_eq!(v["checks"][check], true, "{check}");
    }
    assert_eq!(v["checks"]["regroup_defect"]["value"], 0.0);
    assert!(v["atoms"].as_array().unwrap().iter().all(|a| a["size_slack"]["value"].as_f64().unwrap() >= 1.0));
    let text = run(&["report", s(&decomp)]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("size slack"));

    let mut tampered = file.clone();
    let a0 = tampered["terms"][0]["a"][0].as_f64().unwrap();
    tampered["terms"][0]["a"][0] = Value::from(a0 + 1.0);
    std::fs::write(&decomp, serde_json::to_vec(&tampered).unwrap()).unwrap();
    let out = run(&["validate-atoms", s(&decomp)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_code(&out), "ATOM_INVALID");
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let (space, op) = (fixture("C16.space.json"), fixture("C16.operator.json"));
    let signal = write_signal(&dir, &space, 9);
    let again = write_signal(&dir, &space, 9);
    assert_eq!(std::fs::read(&signal).unwrap(), std::fs::read(&again).unwrap());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let out = run(&["decompose", s(&space), s(&op), s(&signal), "--out", s(&a)]);
    assert!(out.status.success());
    let out = run_env(&["decompose", s(&space), s(&op), s(&signal), "--out", s(&b)], &[("HARDY_LAB_THREADS", "1")]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn exponent_and_thread_validation() {
    let dir = TempDir::new().unwrap();
    let (space, op) = (fixture("P8.space.json"), fixture("P8.operator.json"));
    let signal = write_signal(&dir, &space, 1);
    let out_path = dir.path().join("d.json");
    let out = run(&["decompose", s(&space), s(&op), s(&signal), "--p", "1.5", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "P_OUT_OF_RANGE");
    assert!(!out_path.exists());

    let zero = dir.path().join("zero.json");
    std::fs::write(&zero, "[0, 0, 0, 0, 0, 0, 0, 0]").unwrap();
    let out = run(&["decompose", s(&space), s(&op), s(&zero), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "ZERO_SIGNAL");

    let out = run_env(&["space", "report", s(&space)], &[("HARDY_LAB_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "BAD_THREADS");
}

#[test]
fn bundled_fixture_files_are_current() {
    let dir = TempDir::new().unwrap();
    for name in ["P8", "P32", "C16", "G8x8"] {
        let out = run(&["fixture", name, "--dir", s(dir.path())]);
        assert!(out.status.success());
        for kind in ["space", "operator"] {
            let file = format!("{name}.{kind}.json");
            assert_eq!(std::fs::read(dir.path().join(&file)).unwrap(), std::fs::read(fixture(&file)).unwrap(), "{file}");
        }
    }
    let out = run(&["fixture", "K5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_code(&out), "UNKNOWN_FIXTURE");
}
