use std::fmt::Write as _;
use std::fs;

use serde::Serialize;

use super::config::RunConfig;
use crate::analysis::convergence_order;
use crate::domain::{fmt_num, Grid, State};
use crate::error::{Error, Result};
use crate::solver::{
    advance_with, manufactured_solution, spatial_rhs, step, DecayReference, Forcing, Monitor,
    Sources,
};

pub const CONVERGENCE_FILE: &str = "convergence.csv";
/// Final time of the manufactured-solution runs.
pub const MMS_T_END: f64 = 0.5;
/// Horizon of the unforced runs measuring the representation error.
pub const REPR_T_END: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub err_v: f64,
    pub err_u: f64,
    pub err_theta: f64,
    pub repr_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
    pub order_v: f64,
    pub order_u: f64,
    pub order_theta: f64,
    /// `repr_err[i] / repr_err[i + 1]` for consecutive levels.
    pub repr_ratios: Vec<f64>,
    /// Largest tendency of the spatial operator at the uniform equilibrium and
    /// largest change over one step from it.
    pub equilibrium_residual: f64,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Manufactured-solution refinement study to `t = 0.5` on the given levels,
/// with `dt` scaled like `dx²` from `base.dt` on the first level. Each level
/// also runs the base initial data unforced to `t = 1` and records the
/// largest representation-formula error.
pub fn convergence(base: &RunConfig, levels: &[usize]) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return Err(Error::Usage(format!(
            "convergence needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("levels must be strictly increasing".into()));
    }
    let n0 = levels[0] as f64;
    let p = &base.params;
    let mut results = Vec::with_capacity(levels.len());
    for &n in levels {
        let g = Grid::new(n)?;
        let scale = n0 / n as f64;
        let mut controls = base.controls();
        controls.dt = base.dt * scale * scale;

        let (s0, _) = manufactured_solution(0.0, &g, p);
        let sources = |t: f64| -> Sources { manufactured_solution(t, &g, p).1 };
        let monitor = Monitor {
            sample_every: MMS_T_END,
            lp_exponents: Vec::new(),
            reference: DecayReference::default(),
            representation: false,
        };
        let tr = advance_with(
            &s0,
            p,
            &g,
            &controls,
            MMS_T_END,
            &monitor,
            Forcing::Timed(&sources),
        )?;
        let (exact, _) = manufactured_solution(MMS_T_END, &g, p);
        let fin = &tr.final_state;

        let s_repr = base.initial_state(&g)?;
        let monitor = Monitor {
            sample_every: base.sample_every.min(REPR_T_END),
            lp_exponents: Vec::new(),
            reference: DecayReference::default(),
            representation: true,
        };
        let tr_repr = advance_with(
            &s_repr,
            p,
            &g,
            &controls,
            REPR_T_END,
            &monitor,
            Forcing::None,
        )?;
        let repr_err = tr_repr
            .records
            .iter()
            .map(|r| r.repr_err)
            .fold(0.0, f64::max);

        results.push(LevelResult {
            n_cells: n,
            dx: g.dx,
            dt: controls.dt,
            err_v: max_abs_diff(&fin.v, &exact.v),
            err_u: max_abs_diff(&fin.u, &exact.u),
            err_theta: max_abs_diff(&fin.theta, &exact.theta),
            repr_err,
        });
    }
    let order = |f: fn(&LevelResult) -> f64| {
        let pairs: Vec<(f64, f64)> = results.iter().map(|r| (r.dx, f(r))).collect();
        convergence_order(&pairs)
    };
    let order_v = order(|r| r.err_v)?;
    let order_u = order(|r| r.err_u)?;
    let order_theta = order(|r| r.err_theta)?;
    let repr_ratios = results
        .windows(2)
        .map(|w| w[0].repr_err / w[1].repr_err)
        .collect();

    let report = ConvergenceReport {
        levels: results,
        order_v,
        order_u,
        order_theta,
        repr_ratios,
        equilibrium_residual: equilibrium_residual(base, levels[0])?,
    };
    fs::create_dir_all(&base.output_dir)?;
    fs::write(
        base.output_dir.join(CONVERGENCE_FILE),
        format_convergence(&report),
    )?;
    Ok(report)
}

/// Largest `|tendency|` of the unforced operator at the uniform equilibrium,
/// and largest change over one step of the configured scheme from it.
pub fn equilibrium_residual(base: &RunConfig, n: usize) -> Result<f64> {
    let g = Grid::new(n)?;
    let eq = State::equilibrium(&g);
    let rhs = spatial_rhs(&eq, &base.params, &g, None);
    let mut worst = rhs
        .dv
        .iter()
        .chain(&rhs.du)
        .chain(&rhs.dtheta)
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let mut controls = base.controls();
    if base.scheme == crate::solver::Scheme::ExplicitRk2 {
        controls.dt = controls.dt.min(crate::solver::stable_dt(
            &eq,
            &base.params,
            &g,
            controls.cfl_safety,
        ));
    }
    let next = step(&eq, &base.params, &g, &controls, Forcing::None)
        .map_err(|e| Error::Breakdown(e.to_string()))?;
    worst = worst
        .max(max_abs_diff(&next.v, &eq.v))
        .max(max_abs_diff(&next.u, &eq.u))
        .max(max_abs_diff(&next.theta, &eq.theta));
    Ok(worst)
}

pub fn format_convergence(r: &ConvergenceReport) -> String {
    let mut out = String::from("n_cells,dx,dt,err_v,err_u,err_theta,repr_err\n");
    for l in &r.levels {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            l.n_cells,
            fmt_num(l.dx),
            fmt_num(l.dt),
            fmt_num(l.err_v),
            fmt_num(l.err_u),
            fmt_num(l.err_theta),
            fmt_num(l.repr_err)
        );
    }
    out
}
