//! Acceptance gate: evaluates every criterion on the reference scenario at
//! its stated tolerance and prints one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::process::ExitCode;

use lagns::cli_io::verify::{
    parse_tolerances, run_criteria, Tolerances, REFERENCE_CONFIG, TOLERANCES_FILE,
};
use lagns::cli_io::{load_config, RunConfig};
use lagns::domain::{InitialKind, PhysParams};
use lagns::solver::Scheme;

fn reference_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference")
}

/// The reference scenario as defined for the suite, independent of the file.
fn reference_matches(cfg: &RunConfig) -> bool {
    cfg.params == PhysParams::unit(1.0)
        && cfg.initial.kind == InitialKind::Cosine
        && (
            cfg.initial.a_v,
            cfg.initial.a_u,
            cfg.initial.a_theta,
            cfg.initial.k,
        ) == (0.1, 0.1, 0.1, 1)
        && cfg.n_cells == 256
        && cfg.dt == 1e-4
        && cfg.scheme == Scheme::ImexBe
        && cfg.t_end == 50.0
}

fn main() -> ExitCode {
    let dir = reference_dir();
    let mut ok = true;

    let fixture = std::fs::read_to_string(dir.join(TOLERANCES_FILE))
        .map_err(lagns::Error::from)
        .and_then(|text| parse_tolerances(&text));
    let fixture_ok = matches!(&fixture, Ok(t) if *t == Tolerances::default());
    println!(
        "fixture      tolerances.cfg           {}  {}",
        if fixture_ok { "PASS" } else { "FAIL" },
        match &fixture {
            Ok(_) if fixture_ok => "equal to the built-in tolerances".to_string(),
            Ok(_) => "differs from the built-in tolerances".to_string(),
            Err(e) => e.to_string(),
        }
    );
    ok &= fixture_ok;

    let reference = match load_config(&dir.join(REFERENCE_CONFIG)) {
        Ok(cfg) => cfg,
        Err(e) => {
            println!("fixture      s_star.cfg               FAIL  {e}");
            return ExitCode::FAILURE;
        }
    };
    let reference_ok = reference_matches(&reference);
    println!(
        "fixture      s_star.cfg               {}  n_cells {}, dt {:e}, t_end {}, beta {}",
        if reference_ok { "PASS" } else { "FAIL" },
        reference.n_cells,
        reference.dt,
        reference.t_end,
        reference.params.beta
    );
    ok &= reference_ok;

    let work = tempfile::tempdir().expect("temporary directory");
    let results = match run_criteria(
        &reference,
        &Tolerances::default(),
        work.path(),
        None,
        &mut std::io::stdout(),
    ) {
        Ok(r) => r,
        Err(e) => {
            println!("setup error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.to_string())
        .collect();
    ok &= failed.is_empty() && results.len() == 10;
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {}", failed.join(", "));
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
