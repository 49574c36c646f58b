use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

use io::CliError;

#[derive(Debug, Parser)]
#[command(name = "harmonet", version, about = "Oscillator networks, their quantum encodings, and two reductions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a network and print the time series as CSV.
    Simulate(SimulateArgs),
    /// Exit-root energy on glued binary trees.
    GluedTrees(GluedTreesArgs),
    /// Circuits compiled into oscillator networks.
    #[command(subcommand)]
    Bqp(BqpCommand),
    /// Block encodings of the incidence matrix.
    #[command(subcommand)]
    Blockenc(BlockencCommand),
    /// Energy fractions by Born-rule sampling.
    #[command(subcommand)]
    Estimate(EstimateCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendKind {
    Verlet,
    Exact,
    Hamiltonian,
    Qpe,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Network JSON.
    #[arg(long)]
    network: PathBuf,
    /// Final time.
    #[arg(long)]
    t: f64,
    #[arg(long, value_enum, default_value = "exact")]
    backend: BackendKind,
    /// Rows evenly spaced on [0, t]; a single row sits at t.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Verlet step; defaults to 0.01 / sqrt(aleph d).
    #[arg(long)]
    dt: Option<f64>,
    /// Phase-estimation precision for the qpe backend.
    #[arg(long, default_value_t = 1e-3)]
    eps_pe: f64,
    /// Initial state JSON {"x": [..], "v": [..]}; defaults to x = e_1, v = 0.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GluedMode {
    /// Column-space chain, CSV of the exit energy.
    Reduced,
    /// Full random instance, CSV of the exit energy.
    Full,
    /// Find the exit label by sampling, JSON report.
    Solve,
    /// Gap and overlap checks of the chain, JSON report.
    Spectrum,
}

#[derive(Debug, Args)]
struct GluedTreesArgs {
    /// Tree depth.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "reduced")]
    mode: GluedMode,
    /// End of the time grid; defaults to 4n.
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BqpCommand {
    /// Compile a circuit to a network JSON.
    Compile {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Velocities and output energy at time t.
    Run {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Yes/no from the output energy over a time grid; exit 4 inside the promise gap.
    Decide {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Output fraction at or above this means yes.
        #[arg(long)]
        yes: f64,
        /// Output fraction at or below this everywhere means no.
        #[arg(long)]
        no: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Averaged clock overlap under the smoothed time distribution.
    Overlap {
        #[arg(long = "L")]
        gates: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Engineered chain with end-to-end transfer.
    PerfectChain {
        #[arg(long = "L")]
        gates: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum BlockencCommand {
    /// Build the block and compare it with the exact incidence matrix.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    network: PathBuf,
    /// Bit budget; mass and spring widths follow from it unless overridden.
    #[arg(long, default_value_t = 8)]
    r: u32,
    #[arg(long)]
    r_mass: Option<u32>,
    #[arg(long)]
    r_kappa: Option<u32>,
    /// Push basis states through the gate sequence instead of the closed form.
    #[arg(long)]
    circuit: bool,
    /// Also report the simulation cost model at this time.
    #[arg(long)]
    t: Option<f64>,
    /// Target error for the cost model.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EstimateCommand {
    /// Kinetic energy share of a set of masses, e.g. --subset 1,2,5.
    Kinetic(EstimateArgs),
    /// Potential energy share of a set of springs, e.g. --subset 1-2,3-3.
    Potential(EstimateArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    subset: String,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::GluedTrees(args) => commands::glued_trees(args),
        Command::Bqp(cmd) => commands::bqp(cmd),
        Command::Blockenc(BlockencCommand::Verify(args)) => commands::blockenc_verify(args),
        Command::Estimate(EstimateCommand::Kinetic(args)) => commands::estimate(args, false),
        Command::Estimate(EstimateCommand::Potential(args)) => commands::estimate(args, true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
