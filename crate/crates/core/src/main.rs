#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagns::cli_io::{self, sweep::format_sweep};
use lagns::Error;

#[derive(Parser)]
#[command(
    name = "lagns",
    version,
    about = "1D compressible Navier-Stokes in Lagrangian mass coordinates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write timeseries.csv, snapshots and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario for several conductivity exponents.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list of beta values.
        #[arg(long, default_value = "0.5,1,1.5,2.5")]
        betas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution refinement study.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list of cell counts (at least three).
        #[arg(long, default_value = "64,128,256")]
        levels: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite against the reference configs in DIR.
    Verify {
        #[arg(long, default_value = "configs/reference")]
        dir: PathBuf,
        /// Working directory for run outputs (default: a fresh temp directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated criterion numbers to run instead of all ten.
        #[arg(long)]
        only: Option<String>,
    },
}

fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Usage(format!("cannot parse `{s}` in {what}")))
        })
        .collect()
}

fn load(config: &Path, out: Option<PathBuf>) -> Result<cli_io::RunConfig, Error> {
    let mut cfg = cli_io::load_config(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::SimulationFailure { .. } | Error::Breakdown(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => load(&config, out).and_then(|cfg| {
            let s = cli_io::run_scenario(&cfg)?;
            println!("wrote {}", cfg.output_dir.display());
            match (&s.decay_fit, &s.decay_fit_error) {
                (Some(f), _) => println!("eta0 = {:.6}, r_squared = {:.6}", f.eta0, f.r_squared),
                (None, Some(e)) => println!("decay fit: {e}"),
                _ => {}
            }
            println!(
                "mass drift {:.3e}, energy drift {:.3e}, entropy budget defect {:.3e}, representation error {:.3e}",
                s.mass_drift, s.energy_drift, s.entropy_budget_defect, s.repr_max_error
            );
            Ok(ExitCode::SUCCESS)
        }),
        Command::Sweep { config, betas, out } => load(&config, out).and_then(|cfg| {
            let betas: Vec<f64> = parse_list("--betas", &betas)?;
            let rows = cli_io::sweep(&cfg, &betas)?;
            print!("{}", format_sweep(&rows));
            Ok(if rows.iter().all(|r| r.status == "ok") {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }),
        Command::Convergence { config, levels, out } => load(&config, out).and_then(|cfg| {
            let levels: Vec<usize> = parse_list("--levels", &levels)?;
            let r = cli_io::convergence(&cfg, &levels)?;
            print!("{}", cli_io::convergence::format_convergence(&r));
            println!(
                "orders: v {:.4}, u {:.4}, theta {:.4}; representation ratios {:?}; equilibrium residual {:.3e}",
                r.order_v, r.order_u, r.order_theta, r.repr_ratios, r.equilibrium_residual
            );
            Ok(ExitCode::SUCCESS)
        }),
        Command::Verify { dir, out, only } => (|| {
            let only: Option<Vec<u8>> = only.map(|s| parse_list("--only", &s)).transpose()?;
            let work = out.unwrap_or_else(|| {
                std::env::temp_dir().join(format!("lagns-verify-{}", std::process::id()))
            });
            let passed = cli_io::verify(&dir, &work, only.as_deref(), &mut std::io::stdout())?;
            Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        })(),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_for(&e)
    })
}
