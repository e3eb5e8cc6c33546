#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{CliError, Fig2Objective, RegimeArg, SweepParam};
use config::{Overrides, Params};

#[derive(Parser, Debug)]
#[command(name = "thermometry", version, about = "Correlated-bath Ramsey thermometry")]
struct Cli {
    /// key=value parameter file (`#` comments)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (directory for fig2); stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    omega_c: Option<f64>,
    #[arg(long, global = true)]
    omega_co: Option<f64>,
    #[arg(long, global = true)]
    gamma_white: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    time: Option<f64>,
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Two-column `ω J(ω)` table replacing the Ohmic spectrum
    #[arg(long, global = true)]
    spectrum: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decay exponents and their β-derivatives on a (β, t) grid
    Gamma {
        /// Comma-separated inverse temperatures (default: --beta)
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
        /// Comma-separated evolution times (default: --time)
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Precision against N at high and low temperature, with fitted exponents
    Fig2 {
        #[arg(long, default_value_t = 128)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Fig2Objective::Analytic)]
        objective: Fig2Objective,
    },
    /// Analytic, exact and sampled Fisher information side by side
    Fisher {
        /// Closed form to report (default: chosen from β ω_co)
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
    },
    /// Draw readout records
    Sample {
        /// Store every spin instead of only S
        #[arg(long)]
        full: bool,
    },
    /// Vary one parameter over a list of values
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}


fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        alpha: cli.alpha,
        omega_c: cli.omega_c,
        omega_co: cli.omega_co,
        gamma_white: cli.gamma_white,
        beta: cli.beta,
        n: cli.n,
        theta: cli.theta,
        time: cli.time,
        shots: cli.shots,
        seed: cli.seed,
        threads: cli.threads,
        spectrum: cli.spectrum,
    };
    let params = Params::resolve(cli.config.as_deref(), &overrides).map_err(|e| CliError::Config(e.0))?;
    if params.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(params.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    log::debug!("parameters: {}", params.describe());
    let out = cli.out.as_deref();
    match cli.command {
        Command::Gamma { betas, times } => commands::gamma(&params, &betas, &times, out),
        Command::Fig2 { n_max, objective } => commands::fig2(&params, n_max, objective, out),
        Command::Fisher { regime } => commands::fisher(&params, regime, out),
        Command::Sample { full } => commands::sample(&params, full, out),
        Command::Sweep { param, values } => commands::sweep(&params, param, &values, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
