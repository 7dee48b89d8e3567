//! Staggered-grid semi-discretization and time stepping.
//!
//! The evolved system is the momentum equation together with the
//! temperature form of the energy equation:
//!
//! ```text
//! v_t = u_x
//! u_t = σ_x,                       σ = (μ̃ u_x − Rθ) / v
//! c_v θ_t = −(Rθ/v) u_x + μ̃ u_x²/v + κ̃ (θ^β θ_x / v)_x
//! ```
//!
//! with `u = 0` and `θ_x = 0` at both ends. Total energy is monitored, not
//! solved for.

use std::borrow::Cow;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{check_normalization, Grid, PhysParams, State};
use crate::error::{Error, Result};
use crate::functionals::{self, default_lp_exponents, DiagnosticsRecord, RecordInputs};
use crate::representation::ReprAccumulators;
use crate::tridiag;

/// Consecutive accepted steps after which a halved step is restored.
const RESTORE_AFTER: usize = 10;

/// `θ_f^β / v_f` with arithmetic face means.
#[inline]
pub fn face_conductivity(th_l: f64, th_r: f64, v_l: f64, v_r: f64, beta: f64) -> f64 {
    let th_f = 0.5 * (th_l + th_r);
    let k = if beta == 1.0 {
        th_f
    } else if beta == 0.0 {
        1.0
    } else {
        th_f.powf(beta)
    };
    k / (0.5 * (v_l + v_r))
}

/// Time derivatives of the three fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendencies {
    pub dv: Vec<f64>,
    pub du: Vec<f64>,
    pub dtheta: Vec<f64>,
}

/// Forcing added to the tendencies (manufactured-solution mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    pub s_v: Vec<f64>,
    pub s_u: Vec<f64>,
    pub s_theta: Vec<f64>,
}

impl Sources {
    pub fn zero(g: &Grid) -> Self {
        Self {
            s_v: vec![0.0; g.n_cells],
            s_u: vec![0.0; g.n_nodes()],
            s_theta: vec![0.0; g.n_cells],
        }
    }
}

/// Source terms as seen by a stepper.
#[derive(Clone, Copy, Default)]
pub enum Forcing<'a> {
    #[default]
    None,
    Fixed(&'a Sources),
    Timed(&'a (dyn Fn(f64) -> Sources + Sync)),
}

impl<'a> Forcing<'a> {
    fn at(&self, t: f64) -> Option<Cow<'a, Sources>> {
        match *self {
            Forcing::None => None,
            Forcing::Fixed(s) => Some(Cow::Borrowed(s)),
            Forcing::Timed(f) => Some(Cow::Owned(f(t))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexBe,
    ExplicitRk2,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ImexBe => "imex_be",
            Scheme::ExplicitRk2 => "explicit_rk2",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "imex_be" => Ok(Scheme::ImexBe),
            "explicit_rk2" => Ok(Scheme::ExplicitRk2),
            other => Err(format!(
                "unknown scheme `{other}` (expected imex_be or explicit_rk2)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControls {
    pub dt: f64,
    pub scheme: Scheme,
    pub cfl_safety: f64,
    pub max_retries: usize,
    pub positivity_floor: f64,
}

impl StepControls {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            scheme,
            cfl_safety: 0.9,
            max_retries: 12,
            positivity_floor: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.positivity_floor >= 0.0) {
            return Err(Error::InvalidArgument(
                "positivity_floor must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }
}

/// Why a single step was not accepted.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("step rejected: positivity lost (min v = {min_v}, min θ = {min_theta})")]
    Rejected { min_v: f64, min_theta: f64 },
    #[error("step rejected: dt exceeds explicit stability bound {dt_stab}")]
    StabilityLimit { dt_stab: f64 },
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
}

/// Semi-discrete right-hand side on the staggered grid.
pub fn spatial_rhs(s: &State, p: &PhysParams, g: &Grid, src: Option<&Sources>) -> Tendencies {
    let n = g.n_cells;
    let dx = g.dx;
    let mut dv = vec![0.0; n];
    let mut du = vec![0.0; n + 1];
    let mut dtheta = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    for j in 0..n {
        let ux = (s.u[j + 1] - s.u[j]) / dx;
        dv[j] = ux;
        sigma[j] = (p.mu_tilde * ux - p.r_gas * s.theta[j]) / s.v[j];
        dtheta[j] = -p.r_gas * s.theta[j] / s.v[j] * ux + p.mu_tilde * ux * ux / s.v[j];
    }
    for i in 1..n {
        du[i] = (sigma[i] - sigma[i - 1]) / dx;
        let flux = p.kappa_tilde
            * face_conductivity(s.theta[i - 1], s.theta[i], s.v[i - 1], s.v[i], p.beta)
            * (s.theta[i] - s.theta[i - 1])
            / dx;
        // F_i leaves cell i-1 through its right face and enters cell i
        dtheta[i - 1] += flux / dx;
        dtheta[i] -= flux / dx;
    }
    for x in dtheta.iter_mut() {
        *x /= p.c_v;
    }
    if let Some(src) = src {
        add_assign(&mut dv, &src.s_v);
        add_assign(&mut dtheta, &src.s_theta);
        add_assign(&mut du[1..n], &src.s_u[1..n]);
    }
    Tendencies { dv, du, dtheta }
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

fn positivity(s: &State, floor: f64) -> std::result::Result<(), StepError> {
    let min_v = s.v.iter().copied().fold(f64::INFINITY, f64::min);
    let min_theta = s.theta.iter().copied().fold(f64::INFINITY, f64::min);
    // NaN compares false and is rejected too
    if min_v > floor && min_theta > floor {
        Ok(())
    } else {
        Err(StepError::Rejected { min_v, min_theta })
    }
}

/// Increment of one linearly-implicit backward-Euler step: explicit `v`,
/// then implicit viscous `u` with explicit pressure, then implicit conduction
/// in `θ` with conductivity lagged at the old temperature and
/// heating/compression terms taken from the new velocity. Both implicit
/// solves are written in delta form so that increments far below the
/// resolution of the state itself are still computed accurately.
fn imex_increment(
    s: &State,
    p: &PhysParams,
    g: &Grid,
    h: f64,
    floor: f64,
    src: Option<&Sources>,
) -> std::result::Result<Tendencies, StepError> {
    let n = g.n_cells;
    let dx = g.dx;

    let mut dv = Vec::with_capacity(n);
    for j in 0..n {
        let mut rate = (s.u[j + 1] - s.u[j]) / dx;
        if let Some(src) = src {
            rate += src.s_v[j];
        }
        dv.push(h * rate);
    }
    let v: Vec<f64> = s.v.iter().zip(&dv).map(|(a, b)| a + b).collect();
    let min_v = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_v > floor) {
        return Err(StepError::Rejected {
            min_v,
            min_theta: s.theta.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }

    // momentum: interior nodes 1..n-1
    let mut du = vec![0.0; n + 1];
    if n >= 2 {
        let m = n - 1;
        let visc: Vec<f64> = v.iter().map(|vj| p.mu_tilde * h / (dx * dx * vj)).collect();
        let press: Vec<f64> = (0..n).map(|j| p.r_gas * s.theta[j] / v[j]).collect();
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let i = r + 1;
            lower[r] = -visc[i - 1];
            upper[r] = -visc[i];
            diag[r] = 1.0 + visc[i - 1] + visc[i];
            let mut force = -(press[i] - press[i - 1]) / dx;
            if let Some(src) = src {
                force += src.s_u[i];
            }
            rhs[r] =
                visc[i] * (s.u[i + 1] - s.u[i]) - visc[i - 1] * (s.u[i] - s.u[i - 1]) + h * force;
        }
        tridiag::solve(&lower, &diag, &upper, &mut rhs)
            .map_err(|e| StepError::Breakdown(e.to_string()))?;
        du[1..n].copy_from_slice(&rhs);
    }

    // temperature
    let cond_scale = p.kappa_tilde * h / (dx * dx);
    let mut face = vec![0.0; n + 1];
    for i in 1..n {
        face[i] =
            cond_scale * face_conductivity(s.theta[i - 1], s.theta[i], v[i - 1], v[i], p.beta);
    }
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        let ux = ((s.u[j + 1] + du[j + 1]) - (s.u[j] + du[j])) / dx;
        lower[j] = -face[j];
        upper[j] = -face[j + 1];
        diag[j] = p.c_v + face[j] + face[j + 1];
        let mut heat = -p.r_gas * s.theta[j] / v[j] * ux + p.mu_tilde * ux * ux / v[j];
        if let Some(src) = src {
            heat += p.c_v * src.s_theta[j];
        }
        let mut cond = 0.0;
        if j + 1 < n {
            cond += face[j + 1] * (s.theta[j + 1] - s.theta[j]);
        }
        if j > 0 {
            cond -= face[j] * (s.theta[j] - s.theta[j - 1]);
        }
        rhs[j] = cond + h * heat;
    }
    tridiag::solve(&lower, &diag, &upper, &mut rhs)
        .map_err(|e| StepError::Breakdown(e.to_string()))?;

    Ok(Tendencies {
        dv,
        du,
        dtheta: rhs,
    })
}

fn apply(s: &State, inc: &Tendencies, t1: f64) -> State {
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    State {
        t: t1,
        v: add(&s.v, &inc.dv),
        u: add(&s.u, &inc.du),
        theta: add(&s.theta, &inc.dtheta),
    }
}

/// One linearly-implicit backward-Euler step (see [`step`]).
pub fn step_imex(
    s: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    forcing: Forcing<'_>,
) -> std::result::Result<State, StepError> {
    let t1 = s.t + c.dt;
    let src = forcing.at(t1);
    let inc = imex_increment(s, p, g, c.dt, c.positivity_floor, src.as_deref())?;
    let out = apply(s, &inc, t1);
    positivity(&out, c.positivity_floor)?;
    Ok(out)
}

/// Explicit stability bound
/// `cfl · min(dx² min(v) c_v / (2 κ̃ max(θ)^β), dx² min(v) / (2 μ̃))`.
pub fn stable_dt(s: &State, p: &PhysParams, g: &Grid, cfl_safety: f64) -> f64 {
    let min_v = s.v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_th = s.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dx2 = g.dx * g.dx;
    let thermal = dx2 * min_v * p.c_v / (2.0 * p.kappa_tilde * max_th.powf(p.beta));
    let viscous = dx2 * min_v / (2.0 * p.mu_tilde);
    cfl_safety * thermal.min(viscous)
}

fn axpy(s: &State, h: f64, k: &Tendencies) -> State {
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + h * y).collect::<Vec<_>>();
    State {
        t: s.t + h,
        v: add(&s.v, &k.dv),
        u: add(&s.u, &k.du),
        theta: add(&s.theta, &k.dtheta),
    }
}

fn explicit_increment(
    s: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    forcing: Forcing<'_>,
) -> std::result::Result<Tendencies, StepError> {
    let dt_stab = stable_dt(s, p, g, c.cfl_safety);
    if c.dt > dt_stab {
        return Err(StepError::StabilityLimit { dt_stab });
    }
    let h = c.dt;
    let k1 = spatial_rhs(s, p, g, forcing.at(s.t).as_deref());
    let stage = axpy(s, h, &k1);
    positivity(&stage, c.positivity_floor)?;
    let k2 = spatial_rhs(&stage, p, g, forcing.at(s.t + h).as_deref());
    let n = g.n_cells;
    let combine = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(x, y)| 0.5 * h * (x + y))
            .collect::<Vec<_>>()
    };
    let mut du = combine(&k1.du, &k2.du);
    du[0] = 0.0;
    du[n] = 0.0;
    Ok(Tendencies {
        dv: combine(&k1.dv, &k2.dv),
        du,
        dtheta: combine(&k1.dtheta, &k2.dtheta),
    })
}

/// Heun (explicit trapezoid) step of the full semi-discrete system.
pub fn step_explicit(
    s: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    forcing: Forcing<'_>,
) -> std::result::Result<State, StepError> {
    let inc = explicit_increment(s, p, g, c, forcing)?;
    let out = apply(s, &inc, s.t + c.dt);
    positivity(&out, c.positivity_floor)?;
    Ok(out)
}

fn increment(
    s: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    forcing: Forcing<'_>,
) -> std::result::Result<Tendencies, StepError> {
    match c.scheme {
        Scheme::ImexBe => {
            let src = forcing.at(s.t + c.dt);
            imex_increment(s, p, g, c.dt, c.positivity_floor, src.as_deref())
        }
        Scheme::ExplicitRk2 => explicit_increment(s, p, g, c, forcing),
    }
}

/// Advances one step with the configured scheme. Fails with
/// [`StepError::Rejected`] if any `v` or `θ` drops to the positivity floor.
pub fn step(
    s: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    forcing: Forcing<'_>,
) -> std::result::Result<State, StepError> {
    match c.scheme {
        Scheme::ImexBe => step_imex(s, p, g, c, forcing),
        Scheme::ExplicitRk2 => step_explicit(s, p, g, c, forcing),
    }
}

/// Low-order parts of a compensated (Kahan) running sum of increments.
/// Near equilibrium a step changes the state by less than half an ulp, and a
/// plain update would round it away and stall the decay.
#[derive(Debug, Clone)]
struct Compensated {
    v: Vec<f64>,
    u: Vec<f64>,
    theta: Vec<f64>,
}

impl Compensated {
    fn new(g: &Grid) -> Self {
        Self {
            v: vec![0.0; g.n_cells],
            u: vec![0.0; g.n_cells + 1],
            theta: vec![0.0; g.n_cells],
        }
    }

    /// Returns the new state and the new low-order parts without committing.
    fn apply(&self, s: &State, inc: &Tendencies, t1: f64) -> (State, Compensated) {
        fn kahan(hi: &[f64], lo: &[f64], inc: &[f64]) -> (Vec<f64>, Vec<f64>) {
            let mut out_hi = Vec::with_capacity(hi.len());
            let mut out_lo = Vec::with_capacity(hi.len());
            for ((h, l), d) in hi.iter().zip(lo).zip(inc) {
                let y = d - l;
                let t = h + y;
                out_lo.push((t - h) - y);
                out_hi.push(t);
            }
            (out_hi, out_lo)
        }
        let (v, lv) = kahan(&s.v, &self.v, &inc.dv);
        let (u, lu) = kahan(&s.u, &self.u, &inc.du);
        let (theta, lt) = kahan(&s.theta, &self.theta, &inc.dtheta);
        (
            State { t: t1, v, u, theta },
            Compensated {
                v: lv,
                u: lu,
                theta: lt,
            },
        )
    }
}

/// Reference state `(v*, θ*)` the H¹ deviation is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayReference {
    /// Equilibrium carrying the current discrete mass and total energy:
    /// `v* = Σ v dx`, `θ* = E(t) / c_v`. The time stepper does not conserve
    /// total energy exactly, and this is the state it actually relaxes to.
    #[default]
    CurrentEnergy,
    /// `v* = ∫v₀`, `θ* = (c_v ∫θ₀ + kinetic energy₀) / c_v`.
    InitialEnergy,
    /// `v* = ∫v₀`, `θ* = ∫θ₀` (ignores the initial kinetic energy).
    InitialMeanTheta,
}

impl DecayReference {
    pub fn values(&self, s0: &State, s: &State, g: &Grid, p: &PhysParams) -> (f64, f64) {
        let at = match self {
            DecayReference::CurrentEnergy => s,
            _ => s0,
        };
        let (mass, energy) = check_normalization(at, g, p);
        match self {
            DecayReference::InitialMeanTheta => (mass, functionals::mean_theta(s0, g)),
            _ => (mass, energy / p.c_v),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DecayReference::CurrentEnergy => "current_energy",
            DecayReference::InitialEnergy => "initial_energy",
            DecayReference::InitialMeanTheta => "initial_mean_theta",
        }
    }
}

/// What to record along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub sample_every: f64,
    pub lp_exponents: Vec<f64>,
    pub reference: DecayReference,
    /// Track the representation accumulators and fill `repr_err`.
    pub representation: bool,
}

impl Monitor {
    pub fn new(sample_every: f64, beta: f64) -> Self {
        Self {
            sample_every,
            lp_exponents: default_lp_exponents(beta),
            reference: DecayReference::default(),
            representation: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    /// `ln Y` at each record time; empty when the representation is not tracked.
    pub log_y: Vec<f64>,
    pub final_state: State,
    pub accumulators: Option<ReprAccumulators>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Convenience wrapper: unforced run with default monitoring.
pub fn advance(
    s0: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    t_end: f64,
    sample_every: f64,
) -> Result<Trajectory> {
    advance_with(
        s0,
        p,
        g,
        c,
        t_end,
        &Monitor::new(sample_every, p.beta),
        Forcing::None,
    )
}

/// Steps from `s0` to `t_end`, halving `dt` on rejection (restoring it after
/// ten accepted steps), updating the running accumulators on every accepted
/// step and recording diagnostics at every multiple of `sample_every` and at
/// `t_end`. Steps are shortened to land exactly on sample times.
pub fn advance_with(
    s0: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    t_end: f64,
    monitor: &Monitor,
    forcing: Forcing<'_>,
) -> Result<Trajectory> {
    match advance_recording(s0, p, g, c, t_end, monitor, forcing)? {
        (tr, None) => Ok(tr),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`advance_with`], but a simulation failure is returned next to the
/// partial trajectory recorded up to the last good state instead of
/// replacing it. Argument errors are still returned as `Err`.
pub fn advance_recording(
    s0: &State,
    p: &PhysParams,
    g: &Grid,
    c: &StepControls,
    t_end: f64,
    monitor: &Monitor,
    forcing: Forcing<'_>,
) -> Result<(Trajectory, Option<Error>)> {
    c.validate()?;
    s0.check(g)?;
    if !(t_end > s0.t) {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} must exceed the initial time {}",
            s0.t
        )));
    }
    if !(monitor.sample_every > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample_every = {} must be > 0",
            monitor.sample_every
        )));
    }

    let mut acc = monitor
        .representation
        .then(|| ReprAccumulators::new(s0, g, p));
    let mut state = s0.clone();
    let mut comp = Compensated::new(g);
    let mut int_v = 0.0;
    let mut last_diss = functionals::dissipation(s0, g, p);
    let mut records = Vec::new();
    let make_record = |st: &State, int_v: f64, acc: &Option<ReprAccumulators>| {
        let repr_err = acc.as_ref().map_or(0.0, |a| a.relative_error(st, g));
        let (v_star, theta_star) = monitor.reference.values(s0, st, g, p);
        functionals::record(
            st,
            g,
            p,
            &RecordInputs {
                int_v_dt: int_v,
                v_star,
                theta_star,
                lp_exponents: &monitor.lp_exponents,
                repr_err,
            },
        )
    };
    let mut log_y = Vec::new();
    records.push(make_record(&state, int_v, &acc));
    if let Some(a) = acc.as_ref() {
        log_y.push(a.log_y);
    }

    let mut failure = None;
    let mut next_index: u64 = 1;
    let mut dt_cur = c.dt;
    let mut since_cut = 0usize;
    let mut retries = 0usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    loop {
        let target = (s0.t + next_index as f64 * monitor.sample_every).min(t_end);
        let remaining = target - state.t;
        let (h, lands) = if dt_cur >= remaining * (1.0 - 1e-6) {
            (remaining, true)
        } else {
            (dt_cur, false)
        };
        let attempt = increment(&state, p, g, &c.with_dt(h), forcing).and_then(|inc| {
            let t1 = if lands { target } else { state.t + h };
            let (next, lo) = comp.apply(&state, &inc, t1);
            positivity(&next, c.positivity_floor)?;
            Ok((next, lo))
        });
        match attempt {
            Ok((next, lo)) => {
                comp = lo;
                let taken = next.t - state.t;
                let diss = functionals::dissipation(&next, g, p);
                int_v += 0.5 * taken * (last_diss + diss);
                last_diss = diss;
                if let Some(a) = acc.as_mut() {
                    a.update(&next, g, taken);
                }
                state = next;
                accepted += 1;
                retries = 0;
                if dt_cur < c.dt {
                    since_cut += 1;
                    if since_cut >= RESTORE_AFTER {
                        dt_cur = c.dt;
                        since_cut = 0;
                    }
                }
                if lands {
                    records.push(make_record(&state, int_v, &acc));
                    if let Some(a) = acc.as_ref() {
                        log_y.push(a.log_y);
                    }
                    if target >= t_end {
                        break;
                    }
                    next_index += 1;
                }
            }
            Err(StepError::Breakdown(msg)) => {
                failure = Some(Error::SimulationFailure {
                    t: state.t,
                    msg,
                    last_good: Box::new(state.clone()),
                });
                break;
            }
            Err(e) => {
                rejected += 1;
                retries += 1;
                if retries > c.max_retries {
                    failure = Some(Error::SimulationFailure {
                        t: state.t,
                        msg: format!("retries exhausted after {} halvings: {e}", c.max_retries),
                        last_good: Box::new(state.clone()),
                    });
                    break;
                }
                dt_cur = h * 0.5;
                since_cut = 0;
            }
        }
    }

    let tr = Trajectory {
        records,
        log_y,
        final_state: state,
        accumulators: acc,
        accepted_steps: accepted,
        rejected_steps: rejected,
    };
    Ok((tr, failure))
}

/// Amplitude of the manufactured perturbation.
pub const MMS_AMPLITUDE: f64 = 0.1;

/// Pointwise `(v*, u*, θ*)` of the manufactured solution.
pub fn manufactured_point(t: f64, x: f64) -> (f64, f64, f64) {
    let a = MMS_AMPLITUDE * (-t).exp();
    let w = 2.0 * PI * x;
    (1.0 + a * w.cos(), a * w.sin(), 1.0 + a * w.cos())
}

/// Manufactured fields
/// `v* = 1 + a e^{−t} cos 2πx`, `u* = a e^{−t} sin 2πx`, `θ* = 1 + a e^{−t} cos 2πx`
/// sampled on the grid, and the sources that make them exact solutions of
/// the continuous system in tendency form.
pub fn manufactured_solution(t: f64, g: &Grid, p: &PhysParams) -> (State, Sources) {
    let n = g.n_cells;
    let a = MMS_AMPLITUDE * (-t).exp();
    let w = 2.0 * PI;
    let v = g
        .cell_centers
        .iter()
        .map(|&x| manufactured_point(t, x).0)
        .collect();
    let mut u: Vec<f64> = g
        .nodes
        .iter()
        .map(|&x| manufactured_point(t, x).1)
        .collect();
    u[0] = 0.0;
    u[n] = 0.0;
    let theta = g
        .cell_centers
        .iter()
        .map(|&x| manufactured_point(t, x).2)
        .collect();

    let s_v = g
        .cell_centers
        .iter()
        .map(|&x| {
            let c = (w * x).cos();
            // v_t − u_x
            -a * c - a * w * c
        })
        .collect();
    let mut s_u: Vec<f64> = g
        .nodes
        .iter()
        .map(|&x| {
            let (c, s) = ((w * x).cos(), (w * x).sin());
            let v = 1.0 + a * c;
            let th = 1.0 + a * c;
            let ux = a * w * c;
            let uxx = -a * w * w * s;
            let thx = -a * w * s;
            let vx = -a * w * s;
            let sigma_x = (p.mu_tilde * uxx - p.r_gas * thx) / v
                - (p.mu_tilde * ux - p.r_gas * th) * vx / (v * v);
            // u_t − σ_x
            -a * s - sigma_x
        })
        .collect();
    s_u[0] = 0.0;
    s_u[n] = 0.0;
    let s_theta = g
        .cell_centers
        .iter()
        .map(|&x| {
            let (c, s) = ((w * x).cos(), (w * x).sin());
            let v = 1.0 + a * c;
            let th = 1.0 + a * c;
            let ux = a * w * c;
            let thx = -a * w * s;
            let thxx = -a * w * w * c;
            let vx = -a * w * s;
            let thb = th.powf(p.beta);
            let conduction = p.beta * th.powf(p.beta - 1.0) * thx * thx / v + thb * thxx / v
                - thb * thx * vx / (v * v);
            let rhs =
                (-p.r_gas * th * ux / v + p.mu_tilde * ux * ux / v + p.kappa_tilde * conduction)
                    / p.c_v;
            // θ_t − rhs
            -a * c - rhs
        })
        .collect();
    (State { t, v, u, theta }, Sources { s_v, s_u, s_theta })
}

/// Exact time derivatives of the manufactured fields on the grid.
pub fn manufactured_time_derivative(t: f64, g: &Grid) -> Tendencies {
    let (s, _) = manufactured_solution(t, g, &PhysParams::unit(1.0));
    Tendencies {
        dv: s.v.iter().map(|v| -(v - 1.0)).collect(),
        du: s.u.iter().map(|u| -u).collect(),
        dtheta: s.theta.iter().map(|th| -(th - 1.0)).collect(),
    }
}
