//! Command-line grammar of the `mpg` binary and dispatch to the commands.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mpg_core::{NoiseSpec, PhantomKind, SolverKind};

use crate::bench::{cmd_bench, worker_threads, ExperimentSpec};
use crate::commands::{cmd_corrupt, cmd_denoise, cmd_phantom, DenoiseRequest, ImageSource};
use crate::config::SolverOverrides;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "mpg", version, about = "Mixed Poisson-Gaussian image denoising")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Input image (PGM or float format).
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Synthetic input: circles, flat, ramp, checker or checker:N.
    #[arg(long)]
    pub phantom: Option<PhantomKind>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic test image.
    Phantom {
        #[arg(long)]
        phantom: PhantomKind,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Add Poisson(eta u)/eta + N(0, sigma^2) noise to an image.
    Corrupt {
        #[command(flatten)]
        source: Source,
        /// Phantom size.
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        /// Photons per unit intensity.
        #[arg(long)]
        eta: f64,
        /// Gaussian standard deviation.
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Denoise an image and optionally write a per-iteration trace.
    Denoise {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// bca, bcaf, tvl2 or tvkl.
        #[arg(long, default_value = "bca")]
        solver: SolverKind,
        #[command(flatten)]
        overrides: SolverOverrides,
        /// Clean image; enables the snr column of the trace.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// CSV trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run an experiment spec and write a results table.
    Bench {
        spec: PathBuf,
        #[command(flatten)]
        overrides: SolverOverrides,
    },
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Phantom { phantom, width, height, output } => cmd_phantom(phantom, width, height, &output),
        Command::Corrupt { source, width, height, eta, sigma, seed, output } => {
            let src = match (source.input, source.phantom) {
                (Some(path), None) => ImageSource::File(path),
                (None, Some(kind)) => ImageSource::Phantom { kind, width, height },
                _ => return Err(CliError::Usage("give exactly one of --input or --phantom".into())),
            };
            let spec = NoiseSpec { eta, sigma, seed };
            cmd_corrupt(&src, &spec, &output)
        }
        Command::Denoise { input, output, solver, overrides, truth, trace } => {
            let req = DenoiseRequest {
                input,
                output,
                solver,
                config: overrides.resolve(),
                lambda: overrides.lambda,
                truth,
                trace,
            };
            let s = cmd_denoise(&req)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            let snr = s.snr.map(|v| format!(", snr {v:.3} dB")).unwrap_or_default();
            eprintln!(
                "{solver}: {} iterations ({}), final se {:.3e}{snr}, {:.3}s",
                s.iterations,
                if s.converged { "converged" } else { "iteration limit" },
                s.final_se,
                s.seconds
            );
            Ok(())
        }
        Command::Bench { spec, overrides } => {
            let spec = ExperimentSpec::load(&spec)?;
            let report = cmd_bench(&spec, &overrides, worker_threads()?)?;
            let failed = report.failures();
            eprintln!(
                "{} cells, {failed} failed; table written to {}",
                report.rows.len(),
                report.table.display()
            );
            if failed > 0 && failed == report.rows.len() {
                return Err(CliError::Solver(mpg_core::Error::Metric("every bench cell failed".into())));
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
