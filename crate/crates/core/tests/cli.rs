//! Black-box checks of the command-line binary: exit codes, artifact
//! layout and schema rejection.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdho"))
}

fn write(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn solve_produces_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.json",
        r#"{"command":"solve","profile":{"kind":"mathieu","a":2.0,"b":0.3},
            "t0":0.0,"times":[0.5,1.0,1.5],"omega":null}"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["solve", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("solve.csv")).unwrap();
    assert!(csv.starts_with("t,c,s,c_dot,s_dot\n"));
    assert_eq!(csv.lines().count(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["invariants"]["wronskian"]["pass"], true);
}

#[test]
fn missing_scenario_file_exits_2() {
    let status = bin()
        .args(["solve", "--scenario", "/nonexistent/sc.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_scenario_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.json",
        r#"{"command":"solve","profile":{"kind":"free"},"t0":0.0,"times":[1.0],"bogus":1}"#,
    );
    let status = bin()
        .args(["solve", "--scenario"])
        .arg(&scenario)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn command_tag_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.json",
        r#"{"command":"solve","profile":{"kind":"free"},"t0":0.0,"times":[1.0]}"#,
    );
    let status = bin()
        .args(["transition", "--scenario"])
        .arg(&scenario)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn propagate_at_caustic_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Flat omega = 1 over a span of pi: the kernel degenerates to a delta.
    let scenario = write(
        dir.path(),
        "s.json",
        &format!(
            r#"{{"command":"propagate","profile":{{"kind":"constant","kappa0":1.0}},
                "t0":0.0,"t":{},"qs":[0.0,0.5],"q0s":[0.0],"ep_forms":[]}}"#,
            std::f64::consts::PI
        ),
    );
    let status = bin()
        .args(["propagate", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn zero_workers_exits_2() {
    let status = bin()
        .args(["--workers", "0", "models", "validate"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn figures_default_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("figs");
    let status = bin()
        .arg("figures")
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "fig1_gowdy_t3.csv",
        "fig2_gowdy_s.csv",
        "fig3_variances.csv",
        "manifest.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}
