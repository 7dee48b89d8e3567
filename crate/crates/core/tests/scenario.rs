use std::fs;

use lagns::cli_io::scenario::{execute, snapshot_name, SUMMARY_FILE, TIMESERIES_FILE};
use lagns::cli_io::{parse_config, run_scenario, RunConfig};
use lagns::domain::{parse_table, InitialKind};
use lagns::Error;

fn config(text: &str, dir: &std::path::Path) -> RunConfig {
    let mut cfg = parse_config(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

const HEADER: &str = "t,mass,total_energy,entropy_E,dissipation_V,int_V_dt,mean_theta,min_v,max_v,\
min_theta,max_theta,grad_v_sq,grad_u_sq,grad_theta_sq,h1_dev,repr_err";

#[test]
fn equilibrium_run_is_flagged_and_has_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "init.kind = equilibrium\nn_cells = 32\ndt = 1e-3\nt_end = 1",
        dir.path(),
    );
    let s = run_scenario(&cfg).unwrap();
    assert!(s.already_at_equilibrium);
    assert!(s.decay_fit.is_none());
    assert!(s
        .decay_fit_error
        .as_deref()
        .unwrap()
        .contains("insufficient data"));
    let csv = fs::read_to_string(dir.path().join(TIMESERIES_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("{HEADER},lp_1,lp_2"));
    let h1_col = HEADER.split(',').position(|c| c == "h1_dev").unwrap();
    let mut rows = 0;
    for line in lines {
        let h1: f64 = line.split(',').nth(h1_col).unwrap().parse().unwrap();
        assert!(h1 < 1e-13, "{h1}");
        rows += 1;
    }
    assert_eq!(rows, 11);
}

#[test]
fn cosine_reference_run_decays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "n_cells = 64\ndt = 1e-3\nt_end = 20\nsample_every = 0.1",
        dir.path(),
    );
    let s = run_scenario(&cfg).unwrap();
    let b = s.bounds.unwrap();
    assert!(b.corridor_ok);
    let fit = s.decay_fit.unwrap();
    assert!(fit.eta0 > 0.0 && fit.r_squared >= 0.99, "{fit:?}");
    assert!(!s.failed && !s.already_at_equilibrium);
    assert!(s.mass_drift < 1e-13);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["failed"], false);
    assert_eq!(summary["config"]["n_cells"], 64);
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = "init.kind = random_smooth\ninit.a_v = 0.05\ninit.a_u = 0.05\ninit.a_theta = 0.05\n\
                seed = 11\nn_cells = 64\ndt = 1e-3\nt_end = 1";
    run_scenario(&config(text, a.path())).unwrap();
    run_scenario(&config(text, b.path())).unwrap();
    let read = |d: &tempfile::TempDir| fs::read(d.path().join(TIMESERIES_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));

    let c = tempfile::tempdir().unwrap();
    run_scenario(&config(&text.replace("seed = 11", "seed = 12"), c.path())).unwrap();
    assert_ne!(read(&a), read(&c));
}

#[test]
fn final_snapshot_restarts_the_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("n_cells = 32\ndt = 1e-3\nt_end = 0.5", dir.path());
    let out = execute(&cfg).unwrap();
    let snap = dir.path().join(snapshot_name(0.5));
    assert!(dir.path().join(snapshot_name(0.0)).exists());

    let table = parse_table(&fs::read_to_string(&snap).unwrap()).unwrap();
    assert_eq!(table.len(), 2 * 32 + 1);
    let restart_dir = tempfile::tempdir().unwrap();
    let text = format!(
        "init.kind = custom_table\ninit.table = {}\nn_cells = 32\ndt = 1e-3\nt_end = 0.5",
        snap.display()
    );
    let restart = config(&text, restart_dir.path());
    assert_eq!(restart.initial.kind, InitialKind::CustomTable);
    let s = restart.initial_state(&restart.grid().unwrap()).unwrap();
    assert_eq!(s.v, out.final_state.v);
    assert_eq!(s.u, out.final_state.u);
    assert_eq!(s.theta, out.final_state.theta);
}

#[test]
fn unwritable_output_dir_fails_before_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let cfg = config("n_cells = 32\ndt = 1e-3\nt_end = 100", &blocker.join("out"));
    let started = std::time::Instant::now();
    assert!(matches!(run_scenario(&cfg), Err(Error::Io(_))));
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn simulation_failure_flushes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // no amount of halving reaches the explicit stability bound
    let cfg = config(
        "scheme = explicit_rk2\ndt = 1\nn_cells = 256\nt_end = 1",
        dir.path(),
    );
    let err = run_scenario(&cfg).unwrap_err();
    assert!(matches!(err, Error::SimulationFailure { .. }), "{err}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["failed"], true);
    assert!(summary["failure"]
        .as_str()
        .unwrap()
        .contains("retries exhausted"));
    let csv = fs::read_to_string(dir.path().join(TIMESERIES_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
