//! Grid, physical parameters, states and initial-data builders.
//!
//! Velocity lives on the `N + 1` nodes `x_i = i·dx`; specific volume and
//! temperature live on the `N` cell centers `x_j = (j + 1/2)·dx` (0-based).
//! With `u_0 = u_N = 0` the discrete mass `Σ v_j dx` telescopes exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_normal::standard_normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the gas. The viscosity exponent is fixed to zero
/// and therefore not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub beta: f64,
    pub mu_tilde: f64,
    pub kappa_tilde: f64,
    pub r_gas: f64,
    pub c_v: f64,
}

impl PhysParams {
    /// Unit constants with the given conductivity exponent.
    pub fn unit(beta: f64) -> Self {
        Self {
            beta,
            mu_tilde: 1.0,
            kappa_tilde: 1.0,
            r_gas: 1.0,
            c_v: 1.0,
        }
    }

    /// Checks positivity of every constant. `beta = 0` is the classical
    /// constant-conductivity case and is only accepted with `allow_beta_zero`.
    pub fn validate(&self, allow_beta_zero: bool) -> Result<()> {
        let positive = [
            ("mu_tilde", self.mu_tilde),
            ("kappa_tilde", self.kappa_tilde),
            ("R", self.r_gas),
            ("c_v", self.c_v),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Validation {
                    field,
                    requirement: "finite and > 0",
                    value,
                });
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Validation {
                field: "beta",
                requirement: "finite and >= 0",
                value: self.beta,
            });
        }
        if self.beta == 0.0 && !allow_beta_zero {
            return Err(Error::Regime(self.beta));
        }
        Ok(())
    }
}

/// Free-function form of [`PhysParams::validate`].
pub fn validate_params(p: &PhysParams, allow_beta_zero: bool) -> Result<()> {
    p.validate(allow_beta_zero)
}

/// Uniform partition of the mass interval `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_cells: usize,
    pub dx: f64,
    pub cell_centers: Vec<f64>,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidArgument("n_cells must be >= 1".into()));
        }
        let dx = 1.0 / n_cells as f64;
        let cell_centers = (0..n_cells).map(|j| (j as f64 + 0.5) * dx).collect();
        let nodes = (0..=n_cells).map(|i| i as f64 * dx).collect();
        Ok(Self {
            n_cells,
            dx,
            cell_centers,
            nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }
}

pub fn build_grid(n_cells: usize) -> Result<Grid> {
    Grid::new(n_cells)
}

/// The unknowns `(v, u, θ)` at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
}

impl State {
    /// `v ≡ 1, u ≡ 0, θ ≡ 1` at `t = 0`.
    pub fn equilibrium(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            v: vec![1.0; grid.n_cells],
            u: vec![0.0; grid.n_nodes()],
            theta: vec![1.0; grid.n_cells],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.v.len()
    }

    /// Shape, positivity and boundary checks.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.v.len() != grid.n_cells
            || self.theta.len() != grid.n_cells
            || self.u.len() != grid.n_nodes()
        {
            return Err(Error::InvalidArgument(format!(
                "state shape ({}, {}, {}) does not match grid with {} cells",
                self.v.len(),
                self.u.len(),
                self.theta.len(),
                grid.n_cells
            )));
        }
        if let Some(j) = self.v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Construction(format!(
                "specific volume not positive at cell {j}: {}",
                self.v[j]
            )));
        }
        if let Some(j) = self.theta.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Construction(format!(
                "temperature not positive at cell {j}: {}",
                self.theta[j]
            )));
        }
        let n = grid.n_cells;
        if self.u[0] != 0.0 || self.u[n] != 0.0 {
            return Err(Error::Construction(
                "velocity must vanish at both boundary nodes".into(),
            ));
        }
        Ok(())
    }
}

/// `Σ w_i u_i² / 2 · dx` with trapezoid node weights.
pub fn kinetic_energy(u: &[f64], dx: f64) -> f64 {
    trapezoid_nodes(u.iter().map(|&x| 0.5 * x * x), u.len()) * dx
}

/// `Σ w_i f_i` with `w_0 = w_N = 1/2` and unit weights elsewhere.
pub(crate) fn trapezoid_nodes(values: impl Iterator<Item = f64>, len: usize) -> f64 {
    values
        .enumerate()
        .map(|(i, f)| if i == 0 || i + 1 == len { 0.5 * f } else { f })
        .sum()
}

/// Discrete mass `Σ v_j dx` and total energy `Σ c_v θ_j dx + Σ w_i u_i²/2 dx`.
pub fn check_normalization(s: &State, grid: &Grid, p: &PhysParams) -> (f64, f64) {
    let mass = s.v.iter().sum::<f64>() * grid.dx;
    let thermal = p.c_v * s.theta.iter().sum::<f64>() * grid.dx;
    (mass, thermal + kinetic_energy(&s.u, grid.dx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Equilibrium,
    Cosine,
    RandomSmooth,
    CustomTable,
}

impl InitialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitialKind::Equilibrium => "equilibrium",
            InitialKind::Cosine => "cosine",
            InitialKind::RandomSmooth => "random_smooth",
            InitialKind::CustomTable => "custom_table",
        }
    }
}

impl std::str::FromStr for InitialKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "equilibrium" => Ok(Self::Equilibrium),
            "cosine" => Ok(Self::Cosine),
            "random_smooth" => Ok(Self::RandomSmooth),
            "custom_table" => Ok(Self::CustomTable),
            other => Err(format!(
                "unknown initial kind `{other}` (expected equilibrium, cosine, random_smooth or custom_table)"
            )),
        }
    }
}

/// One row `(x, v, u, θ)` of a tabulated profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub x: f64,
    pub v: f64,
    pub u: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub a_v: f64,
    pub a_u: f64,
    pub a_theta: f64,
    pub k: u32,
    pub seed: u64,
    pub table: Option<Vec<TableRow>>,
}

impl InitialSpec {
    pub fn equilibrium() -> Self {
        Self {
            kind: InitialKind::Equilibrium,
            a_v: 0.0,
            a_u: 0.0,
            a_theta: 0.0,
            k: 1,
            seed: 0,
            table: None,
        }
    }

    pub fn cosine(a_v: f64, a_u: f64, a_theta: f64, k: u32) -> Self {
        Self {
            kind: InitialKind::Cosine,
            a_v,
            a_u,
            a_theta,
            k,
            seed: 0,
            table: None,
        }
    }

    pub fn random_smooth(a_v: f64, a_u: f64, a_theta: f64, seed: u64) -> Self {
        Self {
            kind: InitialKind::RandomSmooth,
            a_v,
            a_u,
            a_theta,
            k: 1,
            seed,
            table: None,
        }
    }

    pub fn custom_table(rows: Vec<TableRow>) -> Self {
        Self {
            kind: InitialKind::CustomTable,
            a_v: 0.0,
            a_u: 0.0,
            a_theta: 0.0,
            k: 1,
            seed: 0,
            table: Some(rows),
        }
    }
}

/// Builds the `t = 0` state.
///
/// `cosine` and `random_smooth` are normalized so that the discrete mass and
/// total energy are both 1: the perturbations have zero discrete mean and the
/// constant part of `θ` is `(1 − kinetic energy) / c_v`.
pub fn make_initial_data(spec: &InitialSpec, grid: &Grid, p: &PhysParams) -> Result<State> {
    let state = match spec.kind {
        InitialKind::Equilibrium => State::equilibrium(grid),
        InitialKind::Cosine => cosine_profile(spec, grid, p)?,
        InitialKind::RandomSmooth => random_smooth_profile(spec, grid, p)?,
        InitialKind::CustomTable => {
            let rows = spec.table.as_deref().ok_or_else(|| {
                Error::Construction("custom_table initial data needs a table".into())
            })?;
            interpolate_table(rows, grid)?
        }
    };
    state.check(grid)?;
    Ok(state)
}

fn check_amplitudes(spec: &InitialSpec) -> Result<()> {
    for (name, a) in [
        ("a_v", spec.a_v),
        ("a_u", spec.a_u),
        ("a_theta", spec.a_theta),
    ] {
        if !a.is_finite() {
            return Err(Error::Construction(format!("{name} is not finite")));
        }
    }
    if spec.a_v.abs() >= 1.0 {
        return Err(Error::Construction(format!(
            "|a_v| = {} must be < 1 to keep v positive",
            spec.a_v.abs()
        )));
    }
    Ok(())
}

fn mean_temperature_for_unit_energy(u: &[f64], grid: &Grid, p: &PhysParams) -> Result<f64> {
    let theta_bar = (1.0 - kinetic_energy(u, grid.dx)) / p.c_v;
    if theta_bar <= 0.0 {
        return Err(Error::Construction(format!(
            "kinetic energy exceeds the unit energy budget (mean temperature would be {theta_bar})"
        )));
    }
    Ok(theta_bar)
}

fn check_theta_amplitude(a_theta: f64, theta_bar: f64) -> Result<()> {
    if a_theta.abs() >= theta_bar {
        return Err(Error::Construction(format!(
            "|a_theta| = {} must be < mean temperature {theta_bar}",
            a_theta.abs()
        )));
    }
    Ok(())
}

fn cosine_profile(spec: &InitialSpec, grid: &Grid, p: &PhysParams) -> Result<State> {
    check_amplitudes(spec)?;
    let n = grid.n_cells;
    if spec.k == 0 || 2 * spec.k as usize > n {
        return Err(Error::Construction(format!(
            "wavenumber k = {} must satisfy 1 <= k <= N/2 = {}",
            spec.k,
            n / 2
        )));
    }
    let w = 2.0 * PI * spec.k as f64;
    let v = grid
        .cell_centers
        .iter()
        .map(|&x| 1.0 + spec.a_v * (w * x).cos())
        .collect();
    let mut u: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&x| spec.a_u * (w * x).sin() + 0.0)
        .collect();
    u[0] = 0.0;
    u[n] = 0.0;
    let theta_bar = mean_temperature_for_unit_energy(&u, grid, p)?;
    check_theta_amplitude(spec.a_theta, theta_bar)?;
    let theta = grid
        .cell_centers
        .iter()
        .map(|&x| theta_bar + spec.a_theta * (w * x).cos())
        .collect();
    Ok(State {
        t: 0.0,
        v,
        u,
        theta,
    })
}

/// Box-Muller on a seeded ChaCha stream; keeps the builder independent of
/// distribution-crate versions so fixtures stay reproducible.
mod rand_distr_normal {
    use rand::Rng;

    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Zero-mean (on cell centers) band-limited field scaled to unit max norm.
fn smooth_cell_field(rng: &mut ChaCha8Rng, grid: &Grid, modes: usize) -> Vec<f64> {
    let coeffs: Vec<(f64, f64)> = (1..=modes)
        .map(|m| {
            let a = standard_normal(rng) / m as f64;
            let b = standard_normal(rng) / m as f64;
            (a, b)
        })
        .collect();
    let mut f: Vec<f64> = grid
        .cell_centers
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let w = 2.0 * PI * (i + 1) as f64 * x;
                    a * w.cos() + b * w.sin()
                })
                .sum()
        })
        .collect();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    f.iter_mut().for_each(|x| *x -= mean);
    let max = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max > 0.0 {
        f.iter_mut().for_each(|x| *x /= max);
    }
    f
}

fn smooth_node_field(rng: &mut ChaCha8Rng, grid: &Grid, modes: usize) -> Vec<f64> {
    let coeffs: Vec<f64> = (1..=modes)
        .map(|m| standard_normal(rng) / m as f64)
        .collect();
    let n = grid.n_cells;
    let mut g: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * (PI * (i + 1) as f64 * x).sin())
                .sum()
        })
        .collect();
    g[0] = 0.0;
    g[n] = 0.0;
    let max = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max > 0.0 {
        g.iter_mut().for_each(|x| *x /= max);
    }
    g
}

fn random_smooth_profile(spec: &InitialSpec, grid: &Grid, p: &PhysParams) -> Result<State> {
    check_amplitudes(spec)?;
    let modes = (grid.n_cells / 8).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fv = smooth_cell_field(&mut rng, grid, modes);
    let gu = smooth_node_field(&mut rng, grid, modes);
    let ft = smooth_cell_field(&mut rng, grid, modes);

    let v = fv.iter().map(|f| 1.0 + spec.a_v * f).collect();
    let u: Vec<f64> = gu.iter().map(|g| spec.a_u * g + 0.0).collect();
    let theta_bar = mean_temperature_for_unit_energy(&u, grid, p)?;
    check_theta_amplitude(spec.a_theta, theta_bar)?;
    let theta = ft.iter().map(|f| theta_bar + spec.a_theta * f).collect();
    Ok(State {
        t: 0.0,
        v,
        u,
        theta,
    })
}

/// Piecewise-linear interpolation of table rows onto the grid, constant
/// beyond the first/last row. Boundary velocities are forced to zero.
fn interpolate_table(rows: &[TableRow], grid: &Grid) -> Result<State> {
    validate_rows(rows)?;
    let v = grid
        .cell_centers
        .iter()
        .map(|&x| interp(rows, x, |r| r.v))
        .collect();
    let theta = grid
        .cell_centers
        .iter()
        .map(|&x| interp(rows, x, |r| r.theta))
        .collect();
    let mut u: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&x| interp(rows, x, |r| r.u))
        .collect();
    let n = grid.n_cells;
    u[0] = 0.0;
    u[n] = 0.0;
    Ok(State {
        t: 0.0,
        v,
        u,
        theta,
    })
}

fn validate_rows(rows: &[TableRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Format {
            line: 1,
            msg: "table has no rows".into(),
        });
    }
    for (i, r) in rows.iter().enumerate() {
        if !(0.0..=1.0).contains(&r.x) {
            return Err(Error::Format {
                line: i + 2,
                msg: format!("x = {} outside [0, 1]", r.x),
            });
        }
        if i > 0 && r.x <= rows[i - 1].x {
            return Err(Error::Format {
                line: i + 2,
                msg: format!("x = {} is not increasing (previous {})", r.x, rows[i - 1].x),
            });
        }
    }
    Ok(())
}

fn interp(rows: &[TableRow], x: f64, field: impl Fn(&TableRow) -> f64) -> f64 {
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    if x <= first.x {
        return field(first);
    }
    if x >= last.x {
        return field(last);
    }
    // first index with rows[k].x > x; k >= 1 here
    let k = rows.partition_point(|r| r.x <= x);
    let (a, b) = (&rows[k - 1], &rows[k]);
    let w = (x - a.x) / (b.x - a.x);
    let (fa, fb) = (field(a), field(b));
    if w == 0.0 {
        fa
    } else {
        fa + w * (fb - fa)
    }
}

pub const TABLE_HEADER: &str = "x v u theta";

/// Parses the `x v u theta` table format.
pub fn parse_table(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header))
            if header
                .split_whitespace()
                .eq(TABLE_HEADER.split_whitespace()) => {}
        Some((i, header)) => {
            return Err(Error::Format {
                line: i + 1,
                msg: format!("expected header `{TABLE_HEADER}`, got `{}`", header.trim()),
            })
        }
        None => {
            return Err(Error::Format {
                line: 1,
                msg: "empty table".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                line: i + 1,
                msg: format!("expected 4 columns, got {}", fields.len()),
            });
        }
        let mut vals = [0.0; 4];
        for (slot, f) in vals.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::Format {
                line: i + 1,
                msg: format!("cannot parse number `{f}`"),
            })?;
        }
        let row = TableRow {
            x: vals[0],
            v: vals[1],
            u: vals[2],
            theta: vals[3],
        };
        if let Some(prev) = rows.last().map(|r: &TableRow| r.x) {
            if row.x <= prev {
                return Err(Error::Format {
                    line: i + 1,
                    msg: format!("x = {} is not increasing (previous {prev})", row.x),
                });
            }
        }
        rows.push(row);
    }
    validate_rows(&rows)?;
    Ok(rows)
}

/// Formats a number with 17 significant digits (exact `f64` round trip).
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a state in the table format on the interleaved node/center lattice
/// `x = 0, dx/2, dx, ...`. Node rows carry the exact `u` and averaged `v, θ`;
/// center rows carry the exact `v, θ` and averaged `u`, so re-reading on the
/// same grid reproduces the state bit-for-bit.
pub fn format_snapshot(s: &State, grid: &Grid) -> String {
    let n = grid.n_cells;
    let mut out = String::with_capacity((2 * n + 2) * 100);
    out.push_str(TABLE_HEADER);
    out.push('\n');
    let mut row = |x: f64, v: f64, u: f64, th: f64| {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            fmt_num(x),
            fmt_num(v),
            fmt_num(u),
            fmt_num(th)
        );
    };
    for i in 0..=n {
        let (v, th) = if i == 0 {
            (s.v[0], s.theta[0])
        } else if i == n {
            (s.v[n - 1], s.theta[n - 1])
        } else {
            (
                0.5 * (s.v[i - 1] + s.v[i]),
                0.5 * (s.theta[i - 1] + s.theta[i]),
            )
        };
        row(grid.nodes[i], v, s.u[i], th);
        if i < n {
            row(
                grid.cell_centers[i],
                s.v[i],
                0.5 * (s.u[i] + s.u[i + 1]),
                s.theta[i],
            );
        }
    }
    out
}
