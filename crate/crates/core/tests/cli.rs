use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lagns::cli_io::verify::{format_tolerances, Tolerances};

fn lagns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagns"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "n_cells = 32\ndt = 1e-3\nt_end = 2\nsample_every = 0.5\n";

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = lagns(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["timeseries.csv", "summary.json", "snap_0.txt", "snap_2.txt"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    assert!(stdout(&out).contains("mass drift"));
}

#[test]
fn configuration_errors_exit_2_naming_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_cells = 32\nbetta = 1\n");
    let out = lagns(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("betta"), "{err}");

    let out = lagns(&[
        "run",
        "--config",
        dir.path().join("missing.cfg").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulation_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scheme = explicit_rk2\ndt = 1\nt_end = 1\n");
    let out = lagns(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_and_convergence_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("o");
    let out = lagns(&[
        "sweep",
        "--config",
        &cfg,
        "--betas",
        "",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let out = lagns(&[
        "convergence",
        "--config",
        &cfg,
        "--levels",
        "64",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("o");
    let out = lagns(&[
        "sweep",
        "--config",
        &cfg,
        "--betas",
        "0.5,2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(stdout(&out), csv);
}

#[test]
fn verify_missing_dir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagns(&["verify", "--dir", dir.path().join("nope").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

/// A reference directory with a small scenario and the given tolerances.
fn reference_dir(root: &Path, tol: &Tolerances) -> std::path::PathBuf {
    let dir = root.join("reference");
    fs::create_dir_all(&dir).unwrap();
    fs::write(
        dir.join("s_star.cfg"),
        "n_cells = 32\ndt = 1e-3\nt_end = 2\n",
    )
    .unwrap();
    fs::write(dir.join("tolerances.cfg"), format_tolerances(tol)).unwrap();
    dir
}

#[test]
fn verify_reports_tampered_tolerance() {
    let root = tempfile::tempdir().unwrap();
    let work = root.path().join("work");
    let args = |dir: &Path| {
        vec![
            "verify".to_string(),
            "--dir".into(),
            dir.to_str().unwrap().into(),
            "--out".into(),
            work.to_str().unwrap().into(),
            "--only".into(),
            "3".into(),
        ]
    };

    let pristine = reference_dir(&root.path().join("a"), &Tolerances::default());
    let a: Vec<String> = args(&pristine);
    let out = lagns(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("criterion  3 mean-theta corridor      PASS"));

    let tampered = reference_dir(
        &root.path().join("b"),
        &Tolerances {
            corridor: -0.5,
            ..Tolerances::default()
        },
    );
    let b: Vec<String> = args(&tampered);
    let out = lagns(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(
        text.contains("criterion  3 mean-theta corridor      FAIL"),
        "{text}"
    );
    assert!(text.contains("failed criteria: 3"));

    let broken = root.path().join("c");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("s_star.cfg"), "n_cells = 32\n").unwrap();
    fs::write(broken.join("tolerances.cfg"), "mass_abs = 1e-11\n").unwrap();
    let c: Vec<String> = args(&broken);
    let out = lagns(&c.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 2);
}
