//! End-to-end runs of the `gaplab` binary on the wheel fixture.

use std::path::Path;
use std::process::Command;

fn gaplab(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gaplab")).arg("--out-dir").arg(dir).args(args).output().unwrap()
}

#[test]
fn fixture_then_cuts_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(dir.path(), &["fixture", "--kind", "wheel-fig5", "--out", "wheel.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let support = dir.path().join("wheel.json");
    assert!(support.exists());

    let support = support.to_str().unwrap();
    let out = gaplab(dir.path(), &["cuts", "--support", support, "--eta", "3/8", "--out", "atlas.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let atlas: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("atlas.json")).unwrap()).unwrap();
    assert!(atlas["cuts"].as_array().is_some_and(|c| !c.is_empty()));

    let atlas = dir.path().join("atlas.json");
    let out = gaplab(dir.path(), &["verify", "--support", support, "--eta", "3/8", "--atlas", atlas.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn unknown_fixture_is_an_error_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(dir.path(), &["fixture", "--kind", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
