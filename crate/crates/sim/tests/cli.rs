use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otdoa-sim"))
}

#[test]
fn gen_hall_run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let hall = dir.path().join("hall.json");
    let st = bin().args(["gen-hall", "--seed", "2", "--out"]).arg(&hall).status().unwrap();
    assert!(st.success());

    for (band, out) in [("cband", "a"), ("mmwave", "b")] {
        let o = bin()
            .args(["run", "--band", band, "--setup", "dynamic", "--seed", "4", "--duration-s", "2", "--sync-ns", "0"])
            .arg("--scenario")
            .arg(&hall)
            .arg("--out")
            .arg(dir.path().join(out))
            .arg("--dump-measurements")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(out).join("measurements.csv").exists());
        assert!(!dir.path().join(out).join("paths.csv").exists());
    }

    let o = bin()
        .arg("compare")
        .arg("--a")
        .arg(dir.path().join("a"))
        .arg("--b")
        .arg(dir.path().join("b"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("Average positioning error [m]"), "{text}");
    assert!(text.contains("cband/dynamic") && text.contains("mmwave/dynamic"));
}

#[test]
fn bad_inputs_exit_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"bounds": 1}"#).unwrap();
    let o = bin()
        .args(["run", "--band", "cband", "--setup", "static", "--seed", "0", "--out"])
        .arg(dir.path().join("x"))
        .arg("--scenario")
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains("schema"), "{err}");

    let o = bin().args(["compare", "--a", "/nonexistent/a", "--b", "/nonexistent/b"]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/a"));

    let o = bin().args(["run", "--band", "xband"]).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn zero_duration_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let hall = dir.path().join("hall.json");
    assert!(bin().args(["gen-hall", "--seed", "0", "--out"]).arg(&hall).status().unwrap().success());
    let o = bin()
        .args(["run", "--band", "cband", "--setup", "static", "--seed", "0", "--duration-s", "0"])
        .arg("--scenario")
        .arg(&hall)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("duration"));
}
