//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored and
//! every key may appear at most once. Recognized keys and their defaults:
//!
//! | key            | default      | meaning                                        |
//! |----------------|--------------|------------------------------------------------|
//! | `beta`         | `1`          | conductivity exponent, > 0                     |
//! | `mu`           | `1`          | viscosity μ̃, > 0                               |
//! | `kappa`        | `1`          | conductivity prefactor κ̃, > 0                  |
//! | `R`            | `1`          | gas constant, > 0                              |
//! | `c_v`          | `1`          | specific heat, > 0                             |
//! | `init.kind`    | `cosine`     | `equilibrium`, `cosine`, `random_smooth`, `custom_table` |
//! | `init.a_v`     | `0.1`        | amplitude of the `v` perturbation              |
//! | `init.a_u`     | `0.1`        | amplitude of the `u` perturbation              |
//! | `init.a_theta` | `0.1`        | amplitude of the `θ` perturbation              |
//! | `init.k`       | `1`          | cosine wavenumber, `1 ≤ k ≤ n_cells / 2`       |
//! | `init.table`   | none         | table file for `custom_table`, relative to the config file |
//! | `n_cells`      | `256`        | number of cells, ≥ 2                           |
//! | `dt`           | `1e-4`       | nominal time step                              |
//! | `scheme`       | `imex_be`    | `imex_be` or `explicit_rk2`                    |
//! | `t_end`        | `50`         | final time                                     |
//! | `sample_every` | `0.1`        | diagnostics interval, ≤ `t_end`                |
//! | `out_dir`      | `out`        | output directory                               |
//! | `lp`           | `β, β+1, 2`  | comma-separated exponents `p > 0` for `Σ θ^{1−p} dx` |
//! | `fit_window`   | `t_end/2, t_end` | decay-fit window `a, b` with `0 ≤ a < b ≤ t_end` |
//! | `seed`         | `0`          | seed for `random_smooth`                       |

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::domain::{
    fmt_num, make_initial_data, parse_table, Grid, InitialKind, InitialSpec, PhysParams, State,
};
use crate::error::{Error, Result};
use crate::functionals::default_lp_exponents;
use crate::solver::{Scheme, StepControls};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: PhysParams,
    /// `table` is never filled here; it is read from `table_path` at run time.
    pub initial: InitialSpec,
    pub table_path: Option<PathBuf>,
    pub n_cells: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub sample_every: f64,
    pub output_dir: PathBuf,
    /// `None` selects [`default_lp_exponents`] for the configured `beta`.
    pub lp_exponents: Option<Vec<f64>>,
    pub fit_window: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut initial = InitialSpec::cosine(0.1, 0.1, 0.1, 1);
        initial.seed = 0;
        Self {
            params: PhysParams::unit(1.0),
            initial,
            table_path: None,
            n_cells: 256,
            dt: 1e-4,
            scheme: Scheme::ImexBe,
            t_end: 50.0,
            sample_every: 0.1,
            output_dir: PathBuf::from("out"),
            lp_exponents: None,
            fit_window: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn lp_exponents(&self) -> Vec<f64> {
        self.lp_exponents
            .clone()
            .unwrap_or_else(|| default_lp_exponents(self.params.beta))
    }

    pub fn fit_window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or((0.5 * self.t_end, self.t_end))
    }

    pub fn controls(&self) -> StepControls {
        StepControls::new(self.dt, self.scheme)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_cells)
    }

    /// Builds the initial state, reading the table file for `custom_table`.
    pub fn initial_state(&self, grid: &Grid) -> Result<State> {
        let mut spec = self.initial.clone();
        spec.seed = self.seed;
        if spec.kind == InitialKind::CustomTable {
            let path = self.table_path.as_ref().ok_or_else(|| {
                Error::Construction("custom_table initial data needs init.table".into())
            })?;
            spec.table = Some(parse_table(&std::fs::read_to_string(path)?)?);
        }
        make_initial_data(&spec, grid, &self.params)
    }

    /// Same configuration with a different `beta`; explicit `lp` exponents
    /// are kept, defaults follow the new `beta`.
    pub fn with_beta(&self, beta: f64) -> Self {
        let mut out = self.clone();
        out.params.beta = beta;
        out
    }
}

const KEYS: &[&str] = &[
    "beta",
    "mu",
    "kappa",
    "R",
    "c_v",
    "init.kind",
    "init.a_v",
    "init.a_u",
    "init.a_theta",
    "init.k",
    "init.table",
    "n_cells",
    "dt",
    "scheme",
    "t_end",
    "sample_every",
    "out_dir",
    "lp",
    "fit_window",
    "seed",
];

fn cfg_err(line: usize, key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, key: &str, val: &str) -> Result<f64> {
    let x: f64 = val
        .parse()
        .map_err(|_| cfg_err(line, key, format!("cannot parse `{val}` as a number")))?;
    if !x.is_finite() {
        return Err(cfg_err(line, key, format!("`{val}` is not finite")));
    }
    Ok(x)
}

fn parse_positive(line: usize, key: &str, val: &str) -> Result<f64> {
    let x = parse_f64(line, key, val)?;
    if !(x > 0.0) {
        return Err(cfg_err(line, key, format!("must be > 0, got {x}")));
    }
    Ok(x)
}

fn parse_list(line: usize, key: &str, val: &str) -> Result<Vec<f64>> {
    val.split(',')
        .map(|item| parse_f64(line, key, item.trim()))
        .collect()
}

/// Parses the configuration text. Absent keys take their defaults; relative
/// paths are kept as written.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut seen: HashMap<&'static str, usize> = HashMap::new();
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| cfg_err(line, content, "expected `key = value`"))?;
        let (key, val) = (key.trim(), val.trim());
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(cfg_err(line, key, "unknown key"));
        };
        if let Some(prev) = seen.insert(key, line) {
            return Err(cfg_err(
                line,
                key,
                format!("duplicate key (first set on line {prev})"),
            ));
        }
        if val.is_empty() {
            return Err(cfg_err(line, key, "missing value"));
        }
        match key {
            "beta" => cfg.params.beta = parse_positive(line, key, val)?,
            "mu" => cfg.params.mu_tilde = parse_positive(line, key, val)?,
            "kappa" => cfg.params.kappa_tilde = parse_positive(line, key, val)?,
            "R" => cfg.params.r_gas = parse_positive(line, key, val)?,
            "c_v" => cfg.params.c_v = parse_positive(line, key, val)?,
            "init.kind" => {
                cfg.initial.kind = val.parse().map_err(|e: String| cfg_err(line, key, e))?
            }
            "init.a_v" => cfg.initial.a_v = parse_f64(line, key, val)?,
            "init.a_u" => cfg.initial.a_u = parse_f64(line, key, val)?,
            "init.a_theta" => cfg.initial.a_theta = parse_f64(line, key, val)?,
            "init.k" => {
                cfg.initial.k = val.parse().ok().filter(|k| *k >= 1).ok_or_else(|| {
                    cfg_err(line, key, format!("expected an integer >= 1, got `{val}`"))
                })?
            }
            "init.table" => cfg.table_path = Some(PathBuf::from(val)),
            "n_cells" => {
                cfg.n_cells = val.parse().ok().filter(|n| *n >= 2).ok_or_else(|| {
                    cfg_err(line, key, format!("expected an integer >= 2, got `{val}`"))
                })?
            }
            "dt" => cfg.dt = parse_positive(line, key, val)?,
            "scheme" => cfg.scheme = val.parse().map_err(|e: String| cfg_err(line, key, e))?,
            "t_end" => cfg.t_end = parse_positive(line, key, val)?,
            "sample_every" => cfg.sample_every = parse_positive(line, key, val)?,
            "out_dir" => cfg.output_dir = PathBuf::from(val),
            "lp" => {
                let list = parse_list(line, key, val)?;
                if let Some(p) = list.iter().find(|p| !(**p > 0.0)) {
                    return Err(cfg_err(
                        line,
                        key,
                        format!("exponents must be > 0, got {p}"),
                    ));
                }
                cfg.lp_exponents = Some(list);
            }
            "fit_window" => {
                let list = parse_list(line, key, val)?;
                match list[..] {
                    [a, b] if a >= 0.0 && a < b => cfg.fit_window = Some((a, b)),
                    _ => return Err(cfg_err(line, key, "expected `a, b` with 0 <= a < b")),
                }
            }
            "seed" => {
                cfg.seed = val.parse().map_err(|_| {
                    cfg_err(
                        line,
                        key,
                        format!("expected an unsigned integer, got `{val}`"),
                    )
                })?
            }
            _ => unreachable!("key list and match arms out of sync: {key}"),
        }
    }
    cfg.initial.seed = cfg.seed;
    let at = |key: &str| seen.get(key).copied().unwrap_or(0);

    if cfg.sample_every > cfg.t_end {
        return Err(cfg_err(
            at("sample_every"),
            "sample_every",
            format!("must not exceed t_end = {}", cfg.t_end),
        ));
    }
    if let Some((_, b)) = cfg.fit_window {
        if b > cfg.t_end {
            return Err(cfg_err(
                at("fit_window"),
                "fit_window",
                format!("end {b} exceeds t_end = {}", cfg.t_end),
            ));
        }
    }
    if cfg.initial.kind == InitialKind::CustomTable && cfg.table_path.is_none() {
        return Err(cfg_err(
            at("init.kind"),
            "init.table",
            "required for custom_table",
        ));
    }
    if cfg.initial.kind == InitialKind::Cosine && cfg.initial.k as usize > cfg.n_cells / 2 {
        return Err(cfg_err(
            at("init.k"),
            "init.k",
            format!("must be <= n_cells / 2 = {}", cfg.n_cells / 2),
        ));
    }
    if cfg.initial.kind != InitialKind::CustomTable {
        // amplitude limits depend on the grid and constants
        let grid = cfg.grid()?;
        if let Err(e) = cfg.initial_state(&grid) {
            let key = match &e {
                Error::Construction(msg) if msg.contains("a_v") => "init.a_v",
                Error::Construction(msg) if msg.contains("a_u") || msg.contains("kinetic") => {
                    "init.a_u"
                }
                Error::Construction(msg) if msg.contains("a_theta") => "init.a_theta",
                _ => "init.kind",
            };
            return Err(cfg_err(at(key), key, e.to_string()));
        }
    }
    Ok(cfg)
}

/// Reads and parses a config file. A relative `init.table` is resolved
/// against the directory of the config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let (Some(table), Some(dir)) = (cfg.table_path.as_mut(), path.parent()) {
        if table.is_relative() {
            *table = dir.join(&*table);
        }
    }
    Ok(cfg)
}

/// Writes every key explicitly, numbers with 17 significant digits, so that
/// `parse_config(&serialize_config(c)) == c`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut lines: Vec<String> = vec![
        format!("beta = {}", fmt_num(cfg.params.beta)),
        format!("mu = {}", fmt_num(cfg.params.mu_tilde)),
        format!("kappa = {}", fmt_num(cfg.params.kappa_tilde)),
        format!("R = {}", fmt_num(cfg.params.r_gas)),
        format!("c_v = {}", fmt_num(cfg.params.c_v)),
        format!("init.kind = {}", cfg.initial.kind.as_str()),
        format!("init.a_v = {}", fmt_num(cfg.initial.a_v)),
        format!("init.a_u = {}", fmt_num(cfg.initial.a_u)),
        format!("init.a_theta = {}", fmt_num(cfg.initial.a_theta)),
        format!("init.k = {}", cfg.initial.k),
    ];
    if let Some(table) = &cfg.table_path {
        lines.push(format!("init.table = {}", table.display()));
    }
    lines.extend([
        format!("n_cells = {}", cfg.n_cells),
        format!("dt = {}", fmt_num(cfg.dt)),
        format!("scheme = {}", cfg.scheme.as_str()),
        format!("t_end = {}", fmt_num(cfg.t_end)),
        format!("sample_every = {}", fmt_num(cfg.sample_every)),
        format!("out_dir = {}", cfg.output_dir.display()),
    ]);
    if let Some(lp) = &cfg.lp_exponents {
        let items: Vec<String> = lp.iter().map(|p| fmt_num(*p)).collect();
        lines.push(format!("lp = {}", items.join(", ")));
    }
    if let Some((a, b)) = cfg.fit_window {
        lines.push(format!("fit_window = {}, {}", fmt_num(a), fmt_num(b)));
    }
    lines.push(format!("seed = {}", cfg.seed));
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_error(text: &str) -> (usize, String) {
        match parse_config(text) {
            Err(Error::Config { line, key, .. }) => (line, key),
            other => panic!("expected a configuration error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("beta=1\ninit.kind=cosine\nn_cells=256\ndt=1e-4\nt_end=20").unwrap();
        assert_eq!(cfg.n_cells, 256);
        assert_eq!(cfg.t_end, 20.0);
        assert_eq!(cfg.scheme, Scheme::ImexBe);
        assert_eq!(cfg.sample_every, 0.1);
        assert_eq!(cfg.lp_exponents(), vec![1.0, 2.0]);
        assert_eq!(cfg.fit_window(), (10.0, 20.0));
    }

    #[test]
    fn rejects_bad_values_with_key_and_line() {
        assert_eq!(config_error("beta=-1"), (1, "beta".into()));
        assert_eq!(config_error("# c\n\nbetta=1"), (3, "betta".into()));
        assert_eq!(config_error("dt=abc"), (1, "dt".into()));
        assert_eq!(config_error("beta=1\nbeta=2"), (2, "beta".into()));
        assert_eq!(config_error("scheme=rk4"), (1, "scheme".into()));
        assert_eq!(
            config_error("t_end=1\nsample_every=2"),
            (2, "sample_every".into())
        );
        assert_eq!(config_error("n_cells=8\ninit.k=5"), (2, "init.k".into()));
        assert_eq!(config_error("init.a_v=1.5"), (1, "init.a_v".into()));
        assert_eq!(
            config_error("init.kind=custom_table"),
            (1, "init.table".into())
        );
        assert_eq!(config_error("lp=1,0"), (1, "lp".into()));
        assert_eq!(config_error("fit_window=3,1"), (1, "fit_window".into()));
        assert_eq!(config_error("just text"), (1, "just text".into()));
    }

    #[test]
    fn serialize_round_trips() {
        let text = "beta = 1.5\nmu = 0.3\nkappa = 2\nR = 0.4\nc_v = 2.5\n\
                    init.kind = random_smooth\ninit.a_v = 0.05\ninit.a_u = 0.1\n\
                    init.a_theta = 0.02\nn_cells = 64\ndt = 0.1\nscheme = explicit_rk2\n\
                    t_end = 3.3\nsample_every = 0.7\nout_dir = some/dir\nlp = 0.1, 2.5\n\
                    fit_window = 1, 3\nseed = 99\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg);
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let cfg = parse_config("  beta = 2.5   # hot\n\n# only a comment\nseed=7").unwrap();
        assert_eq!(cfg.params.beta, 2.5);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.initial.seed, 7);
    }
}
