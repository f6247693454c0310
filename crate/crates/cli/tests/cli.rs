use std::fs;
use std::path::Path;
use std::process::Command;

fn varexp(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_varexp")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rigidity_sweep_counts_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rigidity.json");
    fs::write(
        &config,
        r#"{"sweep": {"resolutions": [65], "seeds": [0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19]}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let (code, err) = varexp(&["rigidity", "--config", path(&config), "--out", path(out)]);
        assert_eq!(code, 0, "{err}");
    }
    let csv = fs::read(a.join("data.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("data.csv")).unwrap());
    assert_eq!(fs::read(a.join("meta.json")).unwrap(), fs::read(b.join("meta.json")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 20 * 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn gamma_default_has_twelve_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let (code, err) = varexp(&["gamma", "--set", "sweep.resolutions=[9]", "--out", path(&out)]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out.join("data.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(
        header,
        ["eps", "F_eps", "gap", "wp_dist", "modular", "compactness_rhs", "tail_1", "tail_2", "tail_5", "tail_10", "iters", "flag"]
    );
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 12));
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(varexp(&["bogus", "--out", path(&out)]).0, 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(varexp(&["norm", "--config", path(&bad), "--out", path(&out)]).0, 2);
    assert_eq!(varexp(&["norm", "--config", path(&dir.path().join("missing.json")), "--out", path(&out)]).0, 2);
    assert_eq!(varexp(&["norm", "--set", "sweep.seeds=[]", "--out", path(&out)]).0, 2);
    let file = dir.path().join("file");
    fs::write(&file, "").unwrap();
    assert_eq!(varexp(&["whitney", "--out", path(&file.join("x"))]).0, 2);
}

#[test]
fn flagged_rows_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, err) = varexp(&[
        "norm",
        "--set",
        "sweep.resolutions=[9]",
        "--set",
        "field.amplitude=1e308",
        "--set",
        "sweep.eps=[1e10]",
        "--out",
        path(&out),
    ]);
    assert_eq!(code, 3, "{err}");
    let csv = fs::read_to_string(out.join("data.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| !l.ends_with(",ok")));
}

#[test]
fn print_defaults_needs_no_output() {
    let out = Command::new(env!("CARGO_BIN_EXE_varexp"))
        .args(["extend", "--print-defaults"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("graph-halfspace"));
}
