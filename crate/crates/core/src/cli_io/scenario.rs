use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::RunConfig;
use crate::analysis::{self, BoundsCertificate, DecayFit, NORM_FLOOR};
use crate::domain::{check_normalization, fmt_num, format_snapshot, Grid, State};
use crate::error::{Error, Result};
use crate::functionals::{self, DiagnosticsRecord};
use crate::solver::{advance_recording, DecayReference, Forcing, Monitor, Trajectory};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const BASE_COLUMNS: &str = "t,mass,total_energy,entropy_E,dissipation_V,int_V_dt,mean_theta,\
min_v,max_v,min_theta,max_theta,grad_v_sq,grad_u_sq,grad_theta_sq,h1_dev,repr_err";

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub failed: bool,
    pub failure: Option<String>,
    pub final_time: f64,
    /// The initial H¹ deviation is already at the fit floor.
    pub already_at_equilibrium: bool,
    /// `max_t |mass(t) − mass(0)|`.
    pub mass_drift: f64,
    /// `max_t |E(t) − E(0)| / |E(0)|` for the total energy.
    pub energy_drift: f64,
    /// `max_t |E(t) + ∫V − E(0)|` for the entropy functional.
    pub entropy_budget_defect: f64,
    /// Largest increase of `E + ∫V` between consecutive samples.
    pub entropy_budget_increase: f64,
    pub bounds: Option<BoundsCertificate>,
    pub bounds_error: Option<String>,
    pub decay_fit: Option<DecayFit>,
    pub decay_fit_error: Option<String>,
    pub repr_max_error: f64,
    /// Final H¹ deviation from `(∫v₀, ∫θ₀)`.
    pub residual_vs_initial_mean_theta: f64,
    /// Final H¹ deviation from `(∫v₀, E(0)/c_v)`.
    pub residual_vs_initial_energy: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub wall_time_s: f64,
}

/// Everything a run produces, for callers that need more than the summary.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub summary: RunSummary,
    pub records: Vec<DiagnosticsRecord>,
    /// `ln Y` aligned with `records`.
    pub log_y: Vec<f64>,
    pub final_state: State,
}

pub fn csv_header(lp: &[f64]) -> String {
    let mut out = BASE_COLUMNS.to_string();
    for p in lp {
        out.push_str(&format!(",lp_{p}"));
    }
    out
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let fields = [
        r.t,
        r.mass,
        r.total_energy,
        r.entropy_e,
        r.dissipation_v,
        r.int_v_dt,
        r.mean_theta,
        r.min_v,
        r.max_v,
        r.min_theta,
        r.max_theta,
        r.grad_v_sq,
        r.grad_u_sq,
        r.grad_theta_sq,
        r.h1_dev,
        r.repr_err,
    ];
    let mut cols: Vec<String> = fields.iter().map(|x| fmt_num(*x)).collect();
    cols.extend(r.lp_moments.iter().map(|(_, m)| fmt_num(*m)));
    cols.join(",")
}

pub fn snapshot_name(t: f64) -> String {
    format!("snap_{t}.txt")
}

fn write_snapshot(dir: &Path, s: &State, g: &Grid) -> Result<()> {
    fs::write(dir.join(snapshot_name(s.t)), format_snapshot(s, g))?;
    Ok(())
}

/// Largest `|E + ∫V − E(0)|` and largest increase of `E + ∫V` between samples.
pub fn entropy_budget(records: &[DiagnosticsRecord]) -> (f64, f64) {
    let Some(first) = records.first() else {
        return (0.0, 0.0);
    };
    let e0 = first.entropy_e;
    let defect = records
        .iter()
        .map(|r| (r.entropy_e + r.int_v_dt - e0).abs())
        .fold(0.0, f64::max);
    let increase = records
        .windows(2)
        .map(|w| (w[1].entropy_e + w[1].int_v_dt) - (w[0].entropy_e + w[0].int_v_dt))
        .fold(0.0, f64::max);
    (defect, increase)
}

/// Runs one scenario and writes `timeseries.csv`, `snap_<t>.txt` at the
/// initial and final time and `summary.json` into the output directory.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunSummary> {
    execute(cfg).map(|o| o.summary)
}

/// [`run_scenario`] returning the full trajectory data as well. On a
/// simulation failure the partial outputs are still written, the summary is
/// marked failed and the failure is returned.
pub fn execute(cfg: &RunConfig) -> Result<ScenarioOutcome> {
    let started = Instant::now();
    let grid = cfg.grid()?;
    let s0 = cfg.initial_state(&grid)?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join(TIMESERIES_FILE))?);
    write_snapshot(dir, &s0, &grid)?;

    let lp = cfg.lp_exponents();
    let monitor = Monitor {
        sample_every: cfg.sample_every,
        lp_exponents: lp.clone(),
        reference: DecayReference::default(),
        representation: true,
    };
    let (tr, failure) = advance_recording(
        &s0,
        &cfg.params,
        &grid,
        &cfg.controls(),
        cfg.t_end,
        &monitor,
        Forcing::None,
    )?;

    writeln!(csv, "{}", csv_header(&lp))?;
    for r in &tr.records {
        writeln!(csv, "{}", csv_row(r))?;
    }
    csv.flush()?;
    if tr.final_state.t > s0.t {
        write_snapshot(dir, &tr.final_state, &grid)?;
    }

    let summary = summarize(cfg, &grid, &s0, &tr, failure.as_ref(), started);
    fs::write(
        dir.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ScenarioOutcome {
        summary,
        records: tr.records,
        log_y: tr.log_y,
        final_state: tr.final_state,
    })
}

fn summarize(
    cfg: &RunConfig,
    grid: &Grid,
    s0: &State,
    tr: &Trajectory,
    failure: Option<&Error>,
    started: Instant,
) -> RunSummary {
    let records = &tr.records;
    let last = &tr.final_state;
    let first = &records[0];
    let mass_drift = records
        .iter()
        .map(|r| (r.mass - first.mass).abs())
        .fold(0.0, f64::max);
    let energy_drift = records
        .iter()
        .map(|r| (r.total_energy - first.total_energy).abs() / first.total_energy.abs())
        .fold(0.0, f64::max);
    let (defect, increase) = entropy_budget(records);
    let (bounds, bounds_error) = match analysis::bounds_certificate(records, first.entropy_e) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.h1_dev)).collect();
    let (decay_fit, decay_fit_error) = match analysis::fit_decay_rate(&series, cfg.fit_window()) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (mass0, energy0) = check_normalization(s0, grid, &cfg.params);
    RunSummary {
        config: cfg.clone(),
        failed: failure.is_some(),
        failure: failure.map(|e| e.to_string()),
        final_time: last.t,
        already_at_equilibrium: first.h1_dev <= NORM_FLOOR,
        mass_drift,
        energy_drift,
        entropy_budget_defect: defect,
        entropy_budget_increase: increase,
        bounds,
        bounds_error,
        decay_fit,
        decay_fit_error,
        repr_max_error: records.iter().map(|r| r.repr_err).fold(0.0, f64::max),
        residual_vs_initial_mean_theta: functionals::h1_deviation(
            last,
            grid,
            mass0,
            functionals::mean_theta(s0, grid),
        ),
        residual_vs_initial_energy: functionals::h1_deviation(
            last,
            grid,
            mass0,
            energy0 / cfg.params.c_v,
        ),
        accepted_steps: tr.accepted_steps,
        rejected_steps: tr.rejected_steps,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// Directory name used for one member of a family of runs.
pub fn member_dir(root: &Path, label: &str, value: f64) -> PathBuf {
    root.join(format!("{label}_{value}"))
}
