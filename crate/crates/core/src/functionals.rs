//! Discrete functionals monitored along trajectories.
//!
//! Cell quantities are integrated with the midpoint rule, nodal velocity
//! with trapezoid weights. Gradient norms use one-sided difference
//! quotients on the natural lattice: interior faces for `v` and `θ`,
//! cells for `u`.

use serde::{Deserialize, Serialize};

use crate::domain::{
    check_normalization, kinetic_energy, trapezoid_nodes, Grid, PhysParams, State,
};
use crate::solver::face_conductivity;

/// `Σ [R (v − ln v) + c_v (θ − ln θ)] dx + Σ w_i u_i²/2 dx`.
pub fn entropy(s: &State, g: &Grid, p: &PhysParams) -> f64 {
    let cells: f64 =
        s.v.iter()
            .zip(&s.theta)
            .map(|(&v, &th)| p.r_gas * (v - v.ln()) + p.c_v * (th - th.ln()))
            .sum();
    cells * g.dx + kinetic_energy(&s.u, g.dx)
}

/// Entropy production rate
/// `Σ_faces κ̃ θ_f^β (Δθ/dx)² / (v_f θ_f²) dx + Σ_cells μ̃ u_x² / (v θ) dx`
/// with arithmetic face means.
pub fn dissipation(s: &State, g: &Grid, p: &PhysParams) -> f64 {
    let (thermal, viscous) = dissipation_parts(s, g, p);
    thermal + viscous
}

/// Thermal and viscous parts of [`dissipation`], in that order.
pub fn dissipation_parts(s: &State, g: &Grid, p: &PhysParams) -> (f64, f64) {
    let dx = g.dx;
    let n = s.v.len();
    let mut thermal = 0.0;
    for i in 1..n {
        let th_f = 0.5 * (s.theta[i - 1] + s.theta[i]);
        let k = face_conductivity(s.theta[i - 1], s.theta[i], s.v[i - 1], s.v[i], p.beta);
        let q = (s.theta[i] - s.theta[i - 1]) / dx;
        thermal += k * q * q / (th_f * th_f);
    }
    let mut viscous = 0.0;
    for j in 0..n {
        let ux = (s.u[j + 1] - s.u[j]) / dx;
        viscous += ux * ux / (s.v[j] * s.theta[j]);
    }
    (p.kappa_tilde * thermal * dx, p.mu_tilde * viscous * dx)
}

pub fn mean_theta(s: &State, g: &Grid) -> f64 {
    s.theta.iter().sum::<f64>() * g.dx
}

/// `Σ θ_j^{1−p} dx`.
pub fn lp_theta_inverse(s: &State, g: &Grid, p_exp: f64) -> f64 {
    let e = 1.0 - p_exp;
    if e == 0.0 {
        return s.theta.len() as f64 * g.dx;
    }
    s.theta.iter().map(|th| th.powf(e)).sum::<f64>() * g.dx
}

/// `Σ_faces ((f_{j+1} − f_j)/dx)² dx` for a cell-centred field.
pub fn grad_sq_cells(f: &[f64], dx: f64) -> f64 {
    f.windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / dx;
            d * d
        })
        .sum::<f64>()
        * dx
}

/// `Σ_cells ((u_{j+1} − u_j)/dx)² dx` for a nodal field.
pub fn grad_sq_nodes(u: &[f64], dx: f64) -> f64 {
    grad_sq_cells(u, dx)
}

/// Discrete H¹ norm of `(v − v*, u, θ − θ*)`.
pub fn h1_deviation(s: &State, g: &Grid, v_star: f64, theta_star: f64) -> f64 {
    let dx = g.dx;
    let l2_v: f64 = s.v.iter().map(|v| (v - v_star).powi(2)).sum::<f64>() * dx;
    let l2_t: f64 = s
        .theta
        .iter()
        .map(|t| (t - theta_star).powi(2))
        .sum::<f64>()
        * dx;
    let l2_u = trapezoid_nodes(s.u.iter().map(|u| u * u), s.u.len()) * dx;
    (l2_v
        + grad_sq_cells(&s.v, dx)
        + l2_u
        + grad_sq_nodes(&s.u, dx)
        + l2_t
        + grad_sq_cells(&s.theta, dx))
    .sqrt()
}

/// Cell stress `σ_j = (μ̃ u_x − R θ_j) / v_j`.
pub fn sigma_field(s: &State, g: &Grid, p: &PhysParams) -> Vec<f64> {
    (0..s.v.len())
        .map(|j| {
            let ux = (s.u[j + 1] - s.u[j]) / g.dx;
            (p.mu_tilde * ux - p.r_gas * s.theta[j]) / s.v[j]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
}

pub fn extrema(s: &State) -> Extrema {
    let mm = |xs: &[f64]| {
        xs.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    };
    let (min_v, max_v) = mm(&s.v);
    let (min_theta, max_theta) = mm(&s.theta);
    Extrema {
        min_v,
        max_v,
        min_theta,
        max_theta,
    }
}

/// One row of monitored functionals at a sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub total_energy: f64,
    pub entropy_e: f64,
    pub dissipation_v: f64,
    pub int_v_dt: f64,
    pub mean_theta: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub grad_v_sq: f64,
    pub grad_u_sq: f64,
    pub grad_theta_sq: f64,
    pub h1_dev: f64,
    pub repr_err: f64,
    /// `(p, Σ θ^{1−p} dx)` in configured order.
    pub lp_moments: Vec<(f64, f64)>,
}

/// Trajectory-level quantities a record needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct RecordInputs<'a> {
    pub int_v_dt: f64,
    pub v_star: f64,
    pub theta_star: f64,
    pub lp_exponents: &'a [f64],
    pub repr_err: f64,
}

pub fn record(s: &State, g: &Grid, p: &PhysParams, inputs: &RecordInputs<'_>) -> DiagnosticsRecord {
    let (mass, total_energy) = check_normalization(s, g, p);
    let ex = extrema(s);
    DiagnosticsRecord {
        t: s.t,
        mass,
        total_energy,
        entropy_e: entropy(s, g, p),
        dissipation_v: dissipation(s, g, p),
        int_v_dt: inputs.int_v_dt,
        mean_theta: mean_theta(s, g),
        min_v: ex.min_v,
        max_v: ex.max_v,
        min_theta: ex.min_theta,
        max_theta: ex.max_theta,
        grad_v_sq: grad_sq_cells(&s.v, g.dx),
        grad_u_sq: grad_sq_nodes(&s.u, g.dx),
        grad_theta_sq: grad_sq_cells(&s.theta, g.dx),
        h1_dev: h1_deviation(s, g, inputs.v_star, inputs.theta_star),
        repr_err: inputs.repr_err,
        lp_moments: inputs
            .lp_exponents
            .iter()
            .map(|&q| (q, lp_theta_inverse(s, g, q)))
            .collect(),
    }
}

/// Moment exponents `{β, β + 1, 2}` without duplicates.
pub fn default_lp_exponents(beta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(3);
    for q in [beta, beta + 1.0, 2.0] {
        if !out.contains(&q) {
            out.push(q);
        }
    }
    out
}
