//! `sideband`: trapped-ion sideband cooling and spectroscopy from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sideband_core::spectroscopy::Observable;

use commands::Run;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "sideband", version, about = "Sideband cooling and spectroscopy of ions in a Penning trap")]
struct Cli {
    /// INI configuration file layered over the scenario preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root of the output tree.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Named scenario preset.
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mode frequencies and Lamb-Dicke parameters.
    Modes,
    /// Coupling-strength map and dark regions of a sideband set.
    Map {
        /// Sideband orders, e.g. "-1,0 -2,0 0,-1".
        #[arg(long, allow_hyphen_values = true)]
        sidebands: Option<String>,
        /// Add the (-2,-1) intermodulation sideband.
        #[arg(long)]
        intermodulation: bool,
        /// Largest phonon number per mode, as N or N1,N2.
        #[arg(long, default_value = "140")]
        n_max: String,
    },
    /// Model excitation spectrum of the scenario.
    Spectrum {
        #[arg(long)]
        observable: Option<Observable>,
        /// Detuning step in Hz.
        #[arg(long)]
        step: Option<f64>,
        /// Half-width of a Doppler-regime scan in Hz.
        #[arg(long)]
        span: Option<f64>,
        /// Probe misalignment; annotates rotational sidebands of planar crystals.
        #[arg(long, default_value_t = 0.0)]
        misalignment: f64,
    },
    /// Run a pulsed cooling sequence from the thermal start state.
    Cool {
        /// Sequence file; the built-in schedule when omitted.
        #[arg(long)]
        sequence: Option<PathBuf>,
        /// Also write the full two-mode distribution.
        #[arg(long)]
        write_distribution: bool,
    },
    /// Search for a cooling sequence within a time budget.
    Optimize {
        /// Total pulse time in seconds.
        #[arg(long, default_value_t = 5e-3)]
        budget: f64,
        #[arg(long, default_value_t = 40)]
        iterations: usize,
        /// Candidate sideband orders, e.g. "-1,0 -2,0 -2,-1".
        #[arg(long, allow_hyphen_values = true)]
        candidates: Option<String>,
        /// Allowed pulse durations in microseconds.
        #[arg(long, value_delimiter = ',')]
        durations: Option<Vec<f64>>,
    },
    /// Fit a measured or synthetic sideband spectrum.
    Fit {
        /// Spectrum CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        observable: Option<Observable>,
    },
    /// Fit a heating rate to n̄ against delay.
    Heat {
        /// Heating CSV.
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate synthetic data.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand)]
enum SynthKind {
    /// Shot-noise-limited spectrum of the scenario.
    Spectrum {
        #[arg(long)]
        observable: Option<Observable>,
        /// Detuning step in Hz.
        #[arg(long)]
        step: Option<f64>,
    },
    /// n̄ against delay for a given heating rate.
    Heating {
        /// Heating rate in quanta per second.
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        nbar0: Option<f64>,
        /// Relative noise on each n̄.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Delays in seconds.
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<f64>>,
    },
}

fn parse_n_max(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("bad --n-max {text:?}; expected N or N1,N2"));
    let parts: Vec<usize> = text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?;
    match parts[..] {
        [n] => Ok((n, n)),
        [a, b] => Ok((a, b)),
        _ => Err(bad()),
    }
}

fn execute(cli: Cli) -> CliResult<String> {
    let settings = config::resolve(cli.config.as_deref(), cli.scenario.as_deref(), cli.seed)?;
    log::info!("scenario {} seed {}", settings.scenario.name, settings.seed);
    let run = Run { settings: &settings, out_root: &cli.out };
    match cli.command {
        Command::Modes => commands::modes(&run),
        Command::Map { sidebands, intermodulation, n_max } => {
            commands::map(&run, &commands::MapArgs { sidebands, intermodulation, n_max: parse_n_max(&n_max)? })
        }
        Command::Spectrum { observable, step, span, misalignment } => {
            commands::spectrum(&run, &commands::SpectrumArgs { observable, step, span, misalignment })
        }
        Command::Cool { sequence, write_distribution } => {
            commands::cool(&run, &commands::CoolArgs { sequence, write_distribution })
        }
        Command::Optimize { budget, iterations, candidates, durations } => commands::optimize(
            &run,
            &commands::OptimizeArgs { budget, iterations, candidates, durations_us: durations },
        ),
        Command::Fit { data, observable } => commands::fit(&run, &commands::FitArgs { data, observable }),
        Command::Heat { data } => commands::heat(&run, &data),
        Command::Synth(SynthArgs { kind: SynthKind::Spectrum { observable, step } }) => {
            commands::synth_spectrum(&run, &commands::SynthSpectrumArgs { observable, step })
        }
        Command::Synth(SynthArgs { kind: SynthKind::Heating { rate, nbar0, noise, delays } }) => {
            let delays = delays.unwrap_or_else(|| (0..=10).map(|k| 0.05 * k as f64).collect());
            commands::synth_heating(&run, &commands::SynthHeatingArgs { rate, nbar0, noise, delays })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sideband: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
