use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lpa_cli::commands::{run_calibrate, run_diagnose, run_fit, run_simulate};
use lpa_cli::config::Overrides;
use lpa_cli::verify::run_verify;
use lpa_cli::{CliError, CliResult};

/// Spatially adaptive local-polynomial estimation with fitted-log-likelihood
/// scale selection.
#[derive(Parser)]
#[command(name = "lpa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Propagation level, in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Risk power, > 0.
    #[arg(long)]
    r: Option<f64>,
    /// Number of scales.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Geometric bandwidth growth factor.
    #[arg(long)]
    u: Option<f64>,
    /// Exponent parameter of the closed-form thresholds, in (0, 1/4).
    #[arg(long)]
    mu: Option<f64>,
    /// Monte-Carlo sample size.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation points: `lo:hi:n` or `v1,v2,...`.
    #[arg(long)]
    grid: Option<String>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            r: self.r,
            scales: self.k,
            growth: self.u,
            mu: self.mu,
            mc_size: self.mc,
            seed: self.seed,
            grid: self.grid.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute critical values for a design and write them as JSON.
    Calibrate {
        /// CSV with columns x (or x1..xd), y, sigma[, sigma_true].
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Adaptive fit at every grid point.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Critical values from `calibrate`; calibrated inline when omitted.
        #[arg(long)]
        cv: Option<PathBuf>,
        /// Also write plot data (x, f_hat, k_hat) here.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo risk experiment for a scene (CSV risk table plus JSON report).
    Simulate {
        #[arg(long)]
        cv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Structural and Monte-Carlo self-checks.
    Verify {
        /// Reduced Monte-Carlo sizes.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Oracle diagnostics for a scene, or design diagnostics for a dataset.
    Diagnose {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        cv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Calibrate { data, common } => {
            run_calibrate(&data, common.config.as_deref(), common.out.as_deref(), &common.overrides())
        }
        Command::Fit { data, cv, plot, common } => run_fit(
            &data,
            common.config.as_deref(),
            cv.as_deref(),
            common.out.as_deref(),
            plot.as_deref(),
            &common.overrides(),
        ),
        Command::Simulate { cv, common } => {
            let config = common
                .config
                .as_deref()
                .ok_or_else(|| CliError::Config("simulate needs --config <scene.json>".into()))?;
            run_simulate(config, cv.as_deref(), common.out.as_deref(), &common.overrides())
        }
        Command::Verify { quick, common } => {
            run_verify(common.config.as_deref(), common.out.as_deref(), quick, &common.overrides())
        }
        Command::Diagnose { data, cv, common } => run_diagnose(
            data.as_deref(),
            common.config.as_deref(),
            cv.as_deref(),
            common.out.as_deref(),
            &common.overrides(),
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
