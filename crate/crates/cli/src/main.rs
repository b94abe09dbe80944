//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 numeric failure,
//! 3 resource budget exceeded.

mod commands;
mod error;
mod oracle;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "libration", version, about = "Cavity cooling model for a levitated nanoparticle's libration")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Bundled parameter set (particle1, particle2).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// JSON parameter file; merged over --preset when both are given.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Master seed for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived quantities (Ω_α, α_zpf, E0, E_c, G, Γ_BA, ...) from first principles.
    Derive,
    /// Closed-form occupation along a detuning, position or gain scan.
    Scan(ScanArgs),
    /// Master-equation steady state compared with the closed-form occupation.
    LindbladSteady(LindbladArgs),
    /// Monte Carlo ensemble of the phase-noise driven cavity.
    StochasticSim(StochasticArgs),
    /// Sideband thermometry.
    #[command(subcommand)]
    Thermometry(ThermometryCmd),
    /// Closed-loop phase noise and occupation against loop gain.
    NoiseEater(NoiseEaterArgs),
    /// Occupation after a sudden change of the heating rate.
    Transient(TransientArgs),
    /// Runs the master-equation and Monte Carlo oracles against the closed forms.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanKind {
    Detuning,
    Position,
    Gain,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(value_enum)]
    pub kind: ScanKind,
    /// Grid start: Hz for detuning, rad for position, 1 for gain.
    #[arg(long)]
    pub from: Option<f64>,
    /// Grid end (inclusive).
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Standing-wave phase k·y for detuning and gain scans (rad).
    #[arg(long)]
    pub ky: Option<f64>,
    /// Loop gain for position scans.
    #[arg(long, default_value_t = 0.0)]
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LindbladModel {
    TwoMode,
    Reduced,
}

#[derive(Debug, Args)]
pub struct LindbladArgs {
    #[arg(long, value_enum, default_value_t = LindbladModel::TwoMode)]
    pub model: LindbladModel,
    /// Initial libration cutoff; raised by 4 until ⟨b†b⟩ converges.
    #[arg(long, default_value_t = 14)]
    pub n_lib: usize,
    #[arg(long, default_value_t = 4)]
    pub n_cav: usize,
    /// Relative cutoff-convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub ky: Option<f64>,
    /// Loop gain applied to the phase noise.
    #[arg(long, default_value_t = 0.0)]
    pub gain: f64,
}

#[derive(Debug, Args)]
pub struct StochasticArgs {
    #[arg(long, default_value_t = 200)]
    pub trajectories: usize,
    /// Record length in libration periods after the transient.
    #[arg(long, default_value_t = 512)]
    pub periods: usize,
    #[arg(long, default_value_t = 24)]
    pub steps_per_period: usize,
    /// Override S as a fraction of κ.
    #[arg(long)]
    pub psd_over_kappa: Option<f64>,
    #[arg(long)]
    pub ky: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ThermometryCmd {
    /// Synthetic heterodyne spectrum with Stokes and anti-Stokes lines.
    Synth {
        #[arg(long)]
        n: f64,
        /// Line FWHM in Hz; defaults to the model's γ_opt/2π.
        #[arg(long)]
        linewidth_hz: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        floor: f64,
        /// Gaussian noise σ as a fraction of the Stokes peak height (needs --seed).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Detector response ratio c₋/c₊.
        #[arg(long, default_value_t = 1.0)]
        c_ratio: f64,
    },
    /// Fits both sidebands of a spectrum CSV and reports n.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Half width of each fit window in Hz; defaults to 10 model linewidths.
        #[arg(long)]
        half_width_hz: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long, default_value_t = 1.0)]
        c_ratio: f64,
    },
    /// Occupation from sideband areas.
    Asymmetry {
        #[arg(long)]
        anti_stokes: f64,
        #[arg(long)]
        stokes: f64,
        #[arg(long, default_value_t = 1.0)]
        c_ratio: f64,
    },
}

#[derive(Debug, Args)]
pub struct NoiseEaterArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gain_max: f64,
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    #[arg(long)]
    pub ky: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TransientArgs {
    /// Occupation at t = 0.
    #[arg(long, default_value_t = 0.04)]
    pub n0: f64,
    /// Total heating rate after the switch, 1/s.
    #[arg(long)]
    pub gamma_total: f64,
    /// Damping rate, rad/s; defaults to the model's γ_opt.
    #[arg(long)]
    pub gamma_opt: Option<f64>,
    #[arg(long)]
    pub t_max: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// G/κ values for the adiabatic-elimination check.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.03])]
    pub g_over_kappa: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 512)]
    pub periods: usize,
    /// Largest Hilbert-space dimension (at most 256).
    #[arg(long, default_value_t = 256)]
    pub max_dim: usize,
    /// Skips the Monte Carlo checks.
    #[arg(long)]
    pub no_stochastic: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // reader closed stdout early, e.g. `| head`
        Err(error::CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
