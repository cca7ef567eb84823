mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{DriverArgs, SolverArgs};
use loewner::Complex64;
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments with complex-driven Loewner evolutions.
#[derive(Parser)]
#[command(name = "loewner", version)]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceMethod {
    /// Pioneer equation for linear drivers off the axes, frontier limits otherwise.
    Auto,
    Pioneer,
    Frontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MembershipArg {
    Arrival,
    Swallow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldFormat {
    Csv,
    Pgm,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    /// Forward trajectory of one seed as CSV.
    Trajectory,
    /// Canonical driver JSON, reusable with `--driver json --spec`.
    Driver,
    /// Trace polylines over the hull contour at `--t-max`.
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Two-sided curve as CSV, with phase and event JSON for linear drivers.
    Trace {
        #[command(flatten)]
        driver: DriverArgs,
        #[arg(long)]
        t_max: f64,
        /// Output spacing in time.
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = TraceMethod::Auto)]
        method: TraceMethod,
        #[command(flatten)]
        solver: SolverArgs,
        /// CSV output; phase and event JSON go beside it.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Hull-time raster of the left or right hull.
    Hull {
        #[command(flatten)]
        driver: DriverArgs,
        #[arg(long)]
        t_max: f64,
        /// Cells per side.
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Grid bounds `x0,x1,y0,y1`; defaults to a box around the hull.
        #[arg(long, allow_hyphen_values = true)]
        bounds: Option<String>,
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
        #[arg(long, value_enum, default_value_t = MembershipArg::Arrival)]
        membership: MembershipArg,
        #[arg(long, value_enum, default_value_t = FieldFormat::Csv)]
        format: FieldFormat,
        /// Sublevel time for PGM shading and SVG contours (default `--t-max`).
        #[arg(long)]
        at: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Phase of the linear driver `c t`.
    Classify {
        #[arg(long, value_parser = config::parse_complex, allow_hyphen_values = true)]
        c: Complex64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Runs a named group of checks; exits 1 when any fails.
    Verify {
        /// symmetries, counterexample, angles or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Restricts the symmetry checks to one driver.
        #[command(flatten)]
        driver: DriverArgs,
        #[arg(long, default_value_t = 64)]
        grid_n: usize,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        /// Raster resolution of the counterexample run.
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// JSON report file.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Hölder-1/2 norm of the driver on a uniform grid.
    Holder {
        #[command(flatten)]
        driver: DriverArgs,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Trajectories, driver specs and SVG plots.
    Export {
        #[arg(value_enum)]
        kind: ExportKind,
        #[command(flatten)]
        driver: DriverArgs,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        /// Seed of the trajectory.
        #[arg(long, value_parser = config::parse_complex, allow_hyphen_values = true)]
        z: Option<Complex64>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Raster cells per side for the SVG contour.
        #[arg(long, default_value_t = 96)]
        n: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { loewner::Exec::Sequential } else { loewner::Exec::Parallel };
    let result = config::configure_threads().and_then(|_| commands::run(cli.command, exec));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
