use std::fmt::Write as _;
use std::fs;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::scenario::{execute, member_dir, ScenarioOutcome};
use crate::domain::fmt_num;
use crate::error::{Error, Result};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const DEFAULT_BETAS: [f64; 4] = [0.5, 1.0, 1.5, 2.5];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub eta0: Option<f64>,
    pub inf_v: Option<f64>,
    pub inf_theta: Option<f64>,
    pub repr_err: Option<f64>,
    /// `ok`, or the failure message.
    pub status: String,
}

impl SweepRow {
    fn from_outcome(beta: f64, out: &ScenarioOutcome) -> Self {
        let s = &out.summary;
        Self {
            beta,
            eta0: s.decay_fit.map(|f| f.eta0),
            inf_v: s.bounds.map(|b| b.inf_v),
            inf_theta: s.bounds.map(|b| b.inf_theta),
            repr_err: Some(s.repr_max_error),
            status: "ok".into(),
        }
    }

    fn failed(beta: f64, e: &Error) -> Self {
        Self {
            beta,
            eta0: None,
            inf_v: None,
            inf_theta: None,
            repr_err: None,
            status: format!("failed: {e}"),
        }
    }
}

/// One sweep member and its full outcome (if it completed).
pub struct SweepMember {
    pub row: SweepRow,
    pub outcome: Option<ScenarioOutcome>,
}

/// Runs the base scenario once per `beta`, concurrently, each into
/// `<out_dir>/beta_<β>/`, and writes `<out_dir>/sweep.csv`. A failing member
/// is recorded in its row and does not stop the others.
pub fn sweep(base: &RunConfig, betas: &[f64]) -> Result<Vec<SweepRow>> {
    Ok(sweep_members(base, betas)?
        .into_iter()
        .map(|m| m.row)
        .collect())
}

pub fn sweep_members(base: &RunConfig, betas: &[f64]) -> Result<Vec<SweepMember>> {
    if betas.is_empty() {
        return Err(Error::Usage("the beta list is empty".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::Usage(format!(
            "beta values must be finite and > 0, got {b}"
        )));
    }
    fs::create_dir_all(&base.output_dir)?;
    let members: Vec<SweepMember> = betas
        .par_iter()
        .map(|&beta| {
            let mut cfg = base.with_beta(beta);
            cfg.output_dir = member_dir(&base.output_dir, "beta", beta);
            match execute(&cfg) {
                Ok(out) => SweepMember {
                    row: SweepRow::from_outcome(beta, &out),
                    outcome: Some(out),
                },
                Err(e) => SweepMember {
                    row: SweepRow::failed(beta, &e),
                    outcome: None,
                },
            }
        })
        .collect();
    let rows: Vec<SweepRow> = members.iter().map(|m| m.row.clone()).collect();
    fs::write(base.output_dir.join(SWEEP_FILE), format_sweep(&rows))?;
    Ok(members)
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), fmt_num);
    let mut out = String::from("beta,eta0,inf_v,inf_theta,repr_err,status\n");
    for r in rows {
        let status = r.status.replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.beta),
            opt(r.eta0),
            opt(r.inf_v),
            opt(r.inf_theta),
            opt(r.repr_err),
            status
        );
    }
    out
}
