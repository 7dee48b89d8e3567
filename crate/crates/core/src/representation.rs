//! Online evaluation of the closed-form representation of the specific
//! volume,
//!
//! ```text
//! v(x,t) = D(x,t) Y(t) [1 + A(x,t)],   A(x,t) = ∫₀ᵗ Rθ(x,τ) / (μ̃ D(x,τ) Y(τ)) dτ,
//! D(x,t) = v₀(x) exp{ [∫₀ˣ(u − u₀)dy − (G(t) − G(0)) / M] / μ̃ },   G = ∫₀¹ v ∫₀ˣ u dy dx,
//! Y(t)   = exp{ −∫₀ᵗ ∫₀¹ (u² + Rθ) dx ds / (μ̃ M) },
//! ```
//!
//! where `M = ∫ v dx` is the conserved mass. With unit constants and unit
//! mass this is the classical formula. Because it only uses the `u` and `θ`
//! histories, comparing its reconstruction with the solver's `v` measures
//! discretization error independently of the `v` update.

use crate::domain::{trapezoid_nodes, Grid, PhysParams, State};

/// Mantissas above this trigger a rescale into the shared log offset.
const RESCALE_THRESHOLD: f64 = 1e200;

/// `∫₀^{x_j} u dy` at each cell center: trapezoid over whole cells, then the
/// half cell using the linear interpolant of `u`.
pub fn cumulative_to_centers(u: &[f64], dx: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut running = 0.0;
    for j in 0..n {
        out.push(running + dx * (3.0 * u[j] + u[j + 1]) / 8.0);
        running += 0.5 * dx * (u[j] + u[j + 1]);
    }
    out
}

fn moment(v: &[f64], cum: &[f64], dx: f64) -> f64 {
    v.iter().zip(cum).map(|(a, b)| a * b).sum::<f64>() * dx
}

/// `D` at cell centers for state `s` relative to the initial state `s0`.
pub fn compute_d(s: &State, s0: &State, g: &Grid, p: &PhysParams) -> Vec<f64> {
    let mass0 = s0.v.iter().sum::<f64>() * g.dx;
    let cum0 = cumulative_to_centers(&s0.u, g.dx);
    let g0 = moment(&s0.v, &cum0, g.dx);
    d_field(s, &s0.v, &cum0, g0, mass0, g, p.mu_tilde)
}

fn d_field(
    s: &State,
    v0: &[f64],
    cum0: &[f64],
    g0: f64,
    mass0: f64,
    g: &Grid,
    mu: f64,
) -> Vec<f64> {
    let cum = cumulative_to_centers(&s.u, g.dx);
    let shift = (moment(&s.v, &cum, g.dx) - g0) / mass0;
    v0.iter()
        .zip(cum.iter().zip(cum0))
        .map(|(&v0j, (&c, &c0))| v0j * (((c - c0) - shift) / mu).exp())
        .collect()
}

/// Running accumulators for one trajectory.
#[derive(Debug, Clone)]
pub struct ReprAccumulators {
    /// `ln Y(t)`.
    pub log_y: f64,
    /// `A_j = a_mantissa_j · exp(a_log_scale)`.
    a_mantissa: Vec<f64>,
    a_log_scale: f64,
    /// `Rθ_j / (μ̃ D_j)` at the previous accepted state.
    last_integrand: Vec<f64>,
    last_log_y: f64,
    last_y_rate: f64,
    s0: State,
    cum0: Vec<f64>,
    g0: f64,
    mass0: f64,
    mu: f64,
    r_gas: f64,
    t: f64,
}

impl ReprAccumulators {
    pub fn new(s0: &State, g: &Grid, p: &PhysParams) -> Self {
        let mass0 = s0.v.iter().sum::<f64>() * g.dx;
        let cum0 = cumulative_to_centers(&s0.u, g.dx);
        let g0 = moment(&s0.v, &cum0, g.dx);
        let mut acc = Self {
            log_y: 0.0,
            a_mantissa: vec![0.0; s0.v.len()],
            a_log_scale: 0.0,
            last_integrand: Vec::new(),
            last_log_y: 0.0,
            last_y_rate: 0.0,
            s0: s0.clone(),
            cum0,
            g0,
            mass0,
            mu: p.mu_tilde,
            r_gas: p.r_gas,
            t: s0.t,
        };
        acc.last_y_rate = acc.y_rate(s0, g);
        acc.last_integrand = acc.integrand(s0, &s0.v);
        acc
    }

    pub fn initial_state(&self) -> &State {
        &self.s0
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> f64 {
        self.log_y.exp()
    }

    /// `A_j` in linear scale (may overflow to infinity for very long runs;
    /// the reconstruction itself never does).
    pub fn a_values(&self) -> Vec<f64> {
        let f = self.a_log_scale.exp();
        self.a_mantissa.iter().map(|m| m * f).collect()
    }

    pub fn d(&self, s: &State, g: &Grid) -> Vec<f64> {
        d_field(s, &self.s0.v, &self.cum0, self.g0, self.mass0, g, self.mu)
    }

    /// `(Σ w_i u_i² dx + R Σ θ_j dx) / (μ̃ M)`.
    fn y_rate(&self, s: &State, g: &Grid) -> f64 {
        let ke2 = trapezoid_nodes(s.u.iter().map(|u| u * u), s.u.len()) * g.dx;
        let th = s.theta.iter().sum::<f64>() * g.dx;
        (ke2 + self.r_gas * th) / (self.mu * self.mass0)
    }

    fn integrand(&self, s: &State, d: &[f64]) -> Vec<f64> {
        let c = self.r_gas / self.mu;
        s.theta.iter().zip(d).map(|(th, dj)| c * th / dj).collect()
    }

    /// Trapezoid update of `ln Y` over the just-accepted step.
    pub fn update_y(&mut self, s: &State, g: &Grid, dt: f64) {
        let rate = self.y_rate(s, g);
        self.last_log_y = self.log_y;
        self.log_y -= 0.5 * dt * (self.last_y_rate + rate);
        self.last_y_rate = rate;
    }

    /// Trapezoid update of `A` over the just-accepted step. Must follow
    /// [`update_y`](Self::update_y) for the same step.
    pub fn update_v_integral(&mut self, s: &State, d: &[f64], dt: f64) {
        let q = self.integrand(s, d);
        let w_prev = 0.5 * dt * (-self.last_log_y - self.a_log_scale).exp();
        let w_cur = 0.5 * dt * (-self.log_y - self.a_log_scale).exp();
        let mut max = 0.0f64;
        for ((m, qp), qc) in self.a_mantissa.iter_mut().zip(&self.last_integrand).zip(&q) {
            *m += w_prev * qp + w_cur * qc;
            max = max.max(*m);
        }
        if !(max <= RESCALE_THRESHOLD) {
            // log-space fallback: move the magnitude into the shared offset
            let shift = max.ln();
            let f = (-shift).exp();
            self.a_mantissa.iter_mut().for_each(|m| *m *= f);
            self.a_log_scale += shift;
        }
        self.last_integrand = q;
        self.t = s.t;
    }

    /// Advances both accumulators to the accepted state `s`, `dt` after the
    /// previous one.
    pub fn update(&mut self, s: &State, g: &Grid, dt: f64) {
        self.update_y(s, g, dt);
        let d = self.d(s, g);
        self.update_v_integral(s, &d, dt);
    }

    /// `v_rec_j = D_j · Y · (1 + A_j)` for the state the accumulators are
    /// current at.
    pub fn reconstruct_v(&self, s: &State, g: &Grid) -> Vec<f64> {
        let d = self.d(s, g);
        let front = (self.log_y + self.a_log_scale).exp();
        let one = (-self.a_log_scale).exp();
        d.iter()
            .zip(&self.a_mantissa)
            .map(|(dj, m)| dj * front * (one + m))
            .collect()
    }

    /// `max_j |v_rec_j − v_j| / v_j`.
    pub fn relative_error(&self, s: &State, g: &Grid) -> f64 {
        self.reconstruct_v(s, g)
            .iter()
            .zip(&s.v)
            .map(|(r, v)| ((r - v) / v).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, make_initial_data, InitialSpec};

    fn unit() -> PhysParams {
        PhysParams::unit(1.0)
    }

    #[test]
    fn d_at_initial_time_is_v0() {
        let g = build_grid(64).unwrap();
        let s0 =
            make_initial_data(&InitialSpec::random_smooth(0.3, 0.2, 0.2, 5), &g, &unit()).unwrap();
        assert_eq!(compute_d(&s0, &s0, &g, &unit()), s0.v);
        let acc = ReprAccumulators::new(&s0, &g, &unit());
        assert_eq!(acc.y(), 1.0);
        assert!(acc.a_values().iter().all(|&a| a == 0.0));
        assert_eq!(acc.reconstruct_v(&s0, &g), s0.v);
        assert_eq!(acc.relative_error(&s0, &g), 0.0);
    }

    #[test]
    fn equilibrium_d_is_one() {
        let g = build_grid(16).unwrap();
        let s0 = State::equilibrium(&g);
        let mut s = s0.clone();
        s.t = 3.0;
        assert!(compute_d(&s, &s0, &g, &unit()).iter().all(|&d| d == 1.0));
    }

    #[test]
    fn one_equilibrium_step_by_hand() {
        let g = build_grid(8).unwrap();
        let s0 = State::equilibrium(&g);
        let mut acc = ReprAccumulators::new(&s0, &g, &unit());
        let dt = 0.01;
        let mut s = s0.clone();
        s.t = dt;
        acc.update(&s, &g, dt);
        assert_eq!(acc.log_y, -dt);
        let expected = dt * (1.0 + dt.exp()) / 2.0;
        for a in acc.a_values() {
            assert!((a - expected).abs() < 1e-16);
        }
    }

    #[test]
    fn equilibrium_closed_forms() {
        let g = build_grid(4).unwrap();
        let s0 = State::equilibrium(&g);
        let mut acc = ReprAccumulators::new(&s0, &g, &unit());
        let dt = 1e-3;
        let mut s = s0.clone();
        for k in 1..=2000 {
            s.t = k as f64 * dt;
            acc.update(&s, &g, dt);
        }
        let t = s.t;
        assert!((acc.log_y + t).abs() < 1e-12);
        for a in acc.a_values() {
            // trapezoid error for ∫ e^τ is dt²/12 (e^t − 1)
            assert!((a - (t.exp() - 1.0)).abs() < dt * dt * t.exp());
        }
        for v in acc.reconstruct_v(&s, &g) {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn long_equilibrium_run_stays_finite() {
        let g = build_grid(2).unwrap();
        let s0 = State::equilibrium(&g);
        let mut acc = ReprAccumulators::new(&s0, &g, &unit());
        let dt = 0.05;
        let mut s = s0.clone();
        for k in 1..=20_000 {
            s.t = k as f64 * dt;
            acc.update(&s, &g, dt);
        }
        // t = 1000: Y underflows in linear scale, A overflows past 1e200
        assert_eq!(acc.y(), 0.0);
        let v = acc.reconstruct_v(&s, &g);
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-3), "{v:?}");
    }

    /// Independent duplicate of `D`: Simpson sub-quadrature of the
    /// piecewise-linear velocity interpolant.
    fn d_oracle(s: &State, s0: &State, g: &Grid) -> Vec<f64> {
        let n = g.n_cells;
        let lin = |u: &[f64], x: f64| {
            let k = ((x / g.dx).floor() as usize).min(n - 1);
            let w = x / g.dx - k as f64;
            u[k] * (1.0 - w) + u[k + 1] * w
        };
        let integral_to = |u: &[f64], x: f64| {
            let m = 2 * 64 * (1 + (x / g.dx) as usize);
            let h = x / m as f64;
            let mut acc = lin(u, 0.0) + lin(u, x);
            for i in 1..m {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * lin(u, i as f64 * h);
            }
            acc * h / 3.0
        };
        let big = |st: &State| -> f64 {
            g.cell_centers
                .iter()
                .zip(&st.v)
                .map(|(&x, &v)| v * integral_to(&st.u, x))
                .sum::<f64>()
                * g.dx
        };
        let mass0: f64 = s0.v.iter().sum::<f64>() * g.dx;
        let shift = (big(s) - big(s0)) / mass0;
        g.cell_centers
            .iter()
            .enumerate()
            .map(|(j, &x)| s0.v[j] * ((integral_to(&s.u, x) - integral_to(&s0.u, x)) - shift).exp())
            .collect()
    }

    #[test]
    fn d_matches_quadrature_duplicate() {
        let g = build_grid(256).unwrap();
        let p = unit();
        let s0 = make_initial_data(&InitialSpec::random_smooth(0.2, 0.2, 0.2, 1), &g, &p).unwrap();
        let s = make_initial_data(&InitialSpec::random_smooth(0.3, 0.3, 0.1, 2), &g, &p).unwrap();
        let fast = compute_d(&s, &s0, &g, &p);
        let slow = d_oracle(&s, &s0, &g);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
