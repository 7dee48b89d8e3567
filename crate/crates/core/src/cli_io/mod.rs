//! Configuration files, scenario execution, output files and the drivers
//! behind the `run`, `sweep`, `convergence` and `verify` subcommands.

pub mod config;
pub mod convergence;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use config::{load_config, parse_config, serialize_config, RunConfig};
pub use convergence::{convergence, ConvergenceReport, LevelResult};
pub use scenario::{execute, run_scenario, RunSummary, ScenarioOutcome};
pub use sweep::{sweep, SweepRow, DEFAULT_BETAS};
pub use verify::{parse_tolerances, run_criteria, verify, CriterionResult, Tolerances};
