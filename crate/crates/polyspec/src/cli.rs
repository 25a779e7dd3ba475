//! Argument definitions and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "polyspec",
    version,
    about = "Limiting spectral densities and resolvent-fluctuation covariance kernels of selfadjoint polynomials in a Wigner matrix and a deterministic diagonal matrix"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "POLYSPEC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a selfadjoint linearization of a polynomial as JSON.
    Linearize(LinearizeArgs),
    /// Limiting spectral density on a grid (density.csv).
    Density(DensityArgs),
    /// Log-kernel and covariance kernel at pairs of spectral parameters (kernel.csv).
    Kernel(KernelArgs),
    /// Monte Carlo resolvent traces and their covariances.
    Simulate(SimulateArgs),
    /// Compare simulated covariances with kernel values (report.csv).
    Compare(CompareArgs),
    /// Run the built-in oracle checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Paired,
    Unpaired,
}

#[derive(Debug, Args)]
pub struct LinearizeArgs {
    /// Selfadjoint polynomial in x and y, e.g. "x*y+y*x".
    #[arg(long)]
    pub poly: String,
    #[arg(long, value_enum, default_value = "paired")]
    pub strategy: StrategyArg,
    /// Also write linearization.json and a sidecar into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Selfadjoint polynomial in x and y.
    #[arg(long)]
    pub poly: String,
    /// Variance σ² of the semicircular element.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma2: f64,
    /// Distribution of the diagonal: "t:w,t:w,..." or JSON [[t,w],...].
    #[arg(long, allow_hyphen_values = true)]
    pub nu: String,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub xmin: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub xmax: f64,
    /// Number of equally spaced grid points, endpoints included.
    #[arg(long, default_value_t = 601)]
    pub npoints: usize,
    /// Distance ε from the real axis in the Stieltjes inversion.
    #[arg(long)]
    pub eps: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairsArg {
    /// (z_i, z_j) and (z_i, conj z_j) for i ≤ j, as used by `compare`.
    Compare,
    /// (z_i, z_j) for all i, j.
    All,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// lim N E[W_ij²] (real).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// lim N E[W_ii²] (default: σ²).
    #[arg(long, allow_negative_numbers = true)]
    pub sigma_tilde2: Option<f64>,
    /// Fourth cumulant parameter κ.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub kappa: f64,
    /// Comma-separated spectral parameters, e.g. "2i,1+1.5i,-1+2i".
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    #[arg(long, value_enum, default_value = "compare")]
    pub pairs: PairsArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory holding traces.csv and covariance.csv from `simulate`.
    #[arg(long)]
    pub sim: PathBuf,
    /// kernel.csv from `kernel`.
    #[arg(long)]
    pub kernel: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Also write selftest.csv and a sidecar into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

fn thread_count(requested: Option<usize>) -> CliResult<usize> {
    match requested {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {}", e)))?;
    pool.install(|| match cli.command {
        Command::Linearize(a) => commands::linearize(a, threads),
        Command::Density(a) => commands::density(a, threads),
        Command::Kernel(a) => commands::kernel(a, threads),
        Command::Simulate(a) => commands::simulate(a, threads),
        Command::Compare(a) => commands::compare(a, threads),
        Command::Selftest(a) => commands::selftest(a, threads),
    })
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code: 0 on success, 1 on usage or I/O errors, 2 on
/// numerical failures. Errors are reported as JSON on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // help and version go to stdout, usage errors to stderr
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn thread_resolution() {
        assert_eq!(thread_count(Some(3)).unwrap(), 3);
        assert!(thread_count(Some(0)).is_err());
        assert!(thread_count(None).unwrap() >= 1);
    }
}
