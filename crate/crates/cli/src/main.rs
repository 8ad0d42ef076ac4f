//! `wnt`: rate curves, field grids, validation reports and asymptotic
//! comparisons for the weak-noise minimizer.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
//! failure. The worker count is read from `WNT_THREADS`.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wnt_core::GridParams;

use commands::{
    cmd_asym, cmd_rate, cmd_shape, cmd_validate, default_probes, parse_probes, AsymParams, RateParams, ShapeParams,
    ValidateParams,
};
use config::{pick, pick_opt, FileConfig};
use error::CliError;
use output::emit;

/// Environment variable holding the worker count.
const THREADS_VAR: &str = "WNT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "wnt",
    version,
    about = "Exact weak-noise minimizer of the stochastic heat equation"
)]
struct Cli {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate function, γ and branch on an α grid.
    Rate(RateArgs),
    /// Fields q, p, w and log det on a (t, x) grid.
    Shape(ShapeArgs),
    /// Run every oracle and write a JSON report.
    Validate(ValidateArgs),
    /// Large-N fields against the closed-form main terms.
    Asym(AsymArgs),
}

#[derive(Debug, Args)]
struct RateArgs {
    /// Horizon T [default: 2].
    #[arg(long)]
    horizon: Option<f64>,
    /// First α [default: -3].
    #[arg(long, allow_hyphen_values = true)]
    alpha_min: Option<f64>,
    /// Last α [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    alpha_max: Option<f64>,
    /// Number of α values, at least 2 [default: 41].
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Horizon T [default: 2].
    #[arg(long)]
    horizon: Option<f64>,
    /// Terminal log-value α [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Number of times [default: 21].
    #[arg(long)]
    nt: Option<usize>,
    /// Number of positions [default: 41].
    #[arg(long)]
    nx: Option<usize>,
    /// Half-width of the x range [default: 6].
    #[arg(long)]
    x_max: Option<f64>,
    /// Distance of the first and last time from the ends [default: 0.01·T].
    #[arg(long)]
    t_min: Option<f64>,
    #[command(flatten)]
    quad: QuadArgs,
}

/// Nyström grid overrides.
#[derive(Debug, Args)]
struct QuadArgs {
    /// Smallest panel width in units of √min(t, T−t) [default: 0.5].
    #[arg(long)]
    ell_min: Option<f64>,
    /// Largest panel width in units of √max(t, T−t) [default: 0.6].
    #[arg(long)]
    ell_max: Option<f64>,
    /// Geometric growth of panel widths [default: 1.3].
    #[arg(long)]
    ratio: Option<f64>,
    /// Multiplier on the truncation length [default: 1].
    #[arg(long)]
    s_factor: Option<f64>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Horizon T [default: 2].
    #[arg(long)]
    horizon: Option<f64>,
    /// Terminal log-value α [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Multiplier on every tolerance [default: 1].
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Factor applied to w before the split-step runs [default: 1].
    #[arg(long)]
    noise_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct AsymArgs {
    /// Half-horizon N, at least 4 [default: 8].
    #[arg(long)]
    n: Option<f64>,
    /// Scaled terminal value ᾱ [default: 1].
    #[arg(long)]
    alpha_bar: Option<f64>,
    /// Probe points `t:x,t:x,...` [default: t ∈ {0.6,…,1.4}·N, x ∈ {−2,…,2}].
    #[arg(long, allow_hyphen_values = true)]
    probes: Option<String>,
    /// Lower bound on τ·γ̄ for the envelope regime [default: 4].
    #[arg(long)]
    threshold: Option<f64>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Numerical(format!("worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let out = pick_opt(&cli.out, &file.out);
    match cli.command {
        Command::Rate(a) => {
            let p = RateParams {
                horizon: pick(&a.horizon, &file.horizon, 2.0),
                alpha_min: pick(&a.alpha_min, &file.alpha_min, -3.0),
                alpha_max: pick(&a.alpha_max, &file.alpha_max, 1.0),
                steps: pick(&a.steps, &file.steps, 41),
            };
            emit(out.as_deref(), &cmd_rate(&p)?)
        }
        Command::Shape(a) => {
            let horizon = pick(&a.horizon, &file.horizon, 2.0);
            let d = GridParams::default();
            let p = ShapeParams {
                horizon,
                alpha: pick(&a.alpha, &file.alpha, 0.0),
                nt: pick(&a.nt, &file.nt, 21),
                nx: pick(&a.nx, &file.nx, 41),
                x_max: pick(&a.x_max, &file.x_max, 6.0),
                t_min: pick(&a.t_min, &file.t_min, 0.01 * horizon),
                grid: GridParams {
                    ell_min: pick(&a.quad.ell_min, &file.ell_min, d.ell_min),
                    ell_max: pick(&a.quad.ell_max, &file.ell_max, d.ell_max),
                    ratio: pick(&a.quad.ratio, &file.ratio, d.ratio),
                    s_factor: pick(&a.quad.s_factor, &file.s_factor, d.s_factor),
                },
            };
            emit(out.as_deref(), &cmd_shape(&p)?)
        }
        Command::Validate(a) => {
            let p = ValidateParams {
                horizon: pick(&a.horizon, &file.horizon, 2.0),
                alpha: pick(&a.alpha, &file.alpha, 0.0),
                tolerance_scale: pick(&a.tolerance_scale, &file.tolerance_scale, 1.0),
                noise_scale: pick(&a.noise_scale, &file.noise_scale, 1.0),
            };
            let (bytes, pass) = cmd_validate(&p)?;
            emit(out.as_deref(), &bytes)?;
            if pass {
                Ok(())
            } else {
                Err(CliError::ValidationFailed(
                    "see the failed list in the report".to_string(),
                ))
            }
        }
        Command::Asym(a) => {
            let n = pick(&a.n, &file.n, 8.0);
            let probes = match pick_opt(&a.probes, &file.probes) {
                Some(text) => parse_probes(&text)?,
                None => default_probes(n),
            };
            let p = AsymParams {
                n,
                alpha_bar: pick(&a.alpha_bar, &file.alpha_bar, 1.0),
                probes,
                threshold: pick(
                    &a.threshold,
                    &file.threshold,
                    wnt_core::asymptotics::DEFAULT_TAU_THRESHOLD,
                ),
            };
            emit(out.as_deref(), &cmd_asym(&p)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wnt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
