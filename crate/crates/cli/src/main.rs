//! `sqdistill`: parameter sweeps and time-series postprocessing for the
//! distillation of phase-diffused squeezed states.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! non-convergence (or a statistically empty result).

mod commands;
mod error;
mod output;
mod settings;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::PhaseModelArg;
use error::CliError;
use settings::SettingsArgs;

#[derive(Parser)]
#[command(
    name = "sqdistill",
    version,
    about = "Distillation of phase-diffused squeezed states: closed-form sweeps, \
             Monte Carlo simulation and homodyne time-series postprocessing",
    after_help = "Tables are CSV with a '#' header echoing the resolved configuration. \
                  Defaults follow the reference squeezed-state regime \
                  (vx=0.32, vp=8.5, q=1.0)."
)]
struct Cli {
    /// '#'-commented key=value defaults file; explicit flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the output table to this file instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// With engine=both: exit 3 if Monte Carlo and analytic columns
    /// disagree beyond 3 combined standard errors on any row
    #[arg(long, global = true)]
    check: bool,
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the phase-noise strength sigma
    SweepSigma {
        /// Comma-separated sigma grid
        #[arg(long, default_value = "0.17,0.28,0.4")]
        grid: String,
        /// Add columns for the anti-squeezed trigger (theta = pi/2)
        /// alongside the squeezed one (theta = 0)
        #[arg(long)]
        conjugate: bool,
    },
    /// Sweep the trigger threshold Q
    SweepThreshold {
        /// Comma-separated Q grid
        #[arg(long, default_value = "0.2,0.4,0.7,1,1.5,2")]
        grid: String,
        /// Add conjugate-quadrature variance and uncertainty-product columns
        #[arg(long)]
        uproduct: bool,
    },
    /// Sweep the trigger angle theta over [0, pi)
    SweepTheta {
        /// Number of equally spaced grid points
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Output variance versus success probability over a Q grid
    Tradeoff {
        /// Comma-separated Q grid
        #[arg(long, default_value = "0.1,0.2,0.3,0.5,0.7,1,1.3,1.7,2.2,3")]
        grid: String,
    },
    /// Channel probing: sweep the required consecutive-trigger depth
    Qcp {
        /// Comma-separated depth grid
        #[arg(long, default_value = "1,2,4")]
        grid: String,
        /// Phase model of the Monte Carlo engine
        #[arg(long, value_enum, default_value_t = PhaseModelArg::Bandlimited)]
        phase_model: PhaseModelArg,
    },
    /// Fock coefficients of the phase-randomized trigger POVM
    Povm {
        /// Highest Fock index to report
        #[arg(long, default_value_t = 20)]
        nmax: usize,
    },
    /// Condition a recorded series file and report the estimate
    Postprocess {
        /// Series file in the sqdistill text format
        file: PathBuf,
        /// Accept every sample (threshold sentinel Q = infinity)
        #[arg(long)]
        no_threshold: bool,
    },
    /// Export a simulated two-detector time series
    GenSeries {
        /// Phase model of the exported stream
        #[arg(long, value_enum, default_value_t = PhaseModelArg::Iid)]
        phase_model: PhaseModelArg,
        /// Sampling rate stamped into the metadata (Hz)
        #[arg(long, default_value_t = 100_000.0)]
        sample_rate: f64,
        /// Lower band edge of the band-limited phase model (Hz)
        #[arg(long, default_value_t = 1_000.0)]
        band_low: f64,
        /// Upper band edge of the band-limited phase model (Hz)
        #[arg(long, default_value_t = 5_000.0)]
        band_high: f64,
        /// Raw-unit vacuum variance stamped and applied to the exported values
        #[arg(long, default_value_t = 1.0)]
        raw_variance: f64,
        /// Randomize the trigger quadrature angle per sample
        #[arg(long)]
        randomized_trigger: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = settings::resolve(&cli.settings, cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::SweepSigma { grid, conjugate } => {
            let grid = settings::parse_grid::<f64>(&grid, "sigma")?;
            commands::sweep_sigma(&settings, grid, conjugate, cli.check, out)
        }
        Command::SweepThreshold { grid, uproduct } => {
            let grid = settings::parse_grid::<f64>(&grid, "threshold")?;
            commands::sweep_threshold(&settings, grid, uproduct, cli.check, out)
        }
        Command::SweepTheta { points } => commands::sweep_theta(&settings, points, cli.check, out),
        Command::Tradeoff { grid } => {
            let grid = settings::parse_grid::<f64>(&grid, "threshold")?;
            commands::tradeoff(&settings, grid, cli.check, out)
        }
        Command::Qcp { grid, phase_model } => {
            let grid = settings::parse_grid::<u32>(&grid, "depth")?;
            commands::qcp(&settings, grid, phase_model, cli.check, out)
        }
        Command::Povm { nmax } => commands::povm(&settings, nmax, out),
        Command::Postprocess { file, no_threshold } => {
            commands::postprocess(&settings, &file, no_threshold, out)
        }
        Command::GenSeries {
            phase_model,
            sample_rate,
            band_low,
            band_high,
            raw_variance,
            randomized_trigger,
        } => commands::gen_series(
            &settings,
            phase_model,
            sample_rate,
            band_low,
            band_high,
            raw_variance,
            randomized_trigger,
            out,
        ),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with successful exit.
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
