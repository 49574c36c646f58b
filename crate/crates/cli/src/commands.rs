use std::io::Write;

use harmonet::blockenc::{self, QuantizationConfig, SimulationCost};
use harmonet::bqpred::{self, Circuit, Decision};
use harmonet::dynamics::{self, Backend};
use harmonet::estimate::{self, Subset};
use harmonet::gluedtrees;
use harmonet::netcore::{encode_primary, NetworkFile};
use harmonet::Error;
use serde::Serialize;

use crate::io::{self, CliError};
use crate::{BackendKind, BqpCommand, EstimateArgs, GluedMode, GluedTreesArgs, SimulateArgs, VerifyArgs};

/// Depth cap for dense eigensolves of a full glued-trees instance.
const FULL_MODE_MAX_DEPTH: usize = 10;

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let net = io::read_network(&args.network)?;
    let state = io::read_state(args.state.as_deref(), net.len())?;
    let times = io::time_grid(args.t, args.samples)?;
    let backend = match args.backend {
        BackendKind::Verlet => Backend::Verlet { dt: args.dt },
        BackendKind::Exact => Backend::Exact,
        BackendKind::Hamiltonian => Backend::Hamiltonian,
        BackendKind::Qpe => Backend::QpeEmulated { eps_pe: args.eps_pe },
    };
    let rows = dynamics::simulate(&net, &state, &times, backend)?;
    let mut out = io::output(args.out.as_deref())?;
    dynamics::write_timeseries_csv(&net, &rows, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn glued_trees(args: GluedTreesArgs) -> Result<(), CliError> {
    let n = args.n;
    match args.mode {
        GluedMode::Reduced | GluedMode::Full => {
            let tmax = args.tmax.unwrap_or(4.0 * n as f64);
            if !(args.dt > 0.0 && tmax.is_finite() && tmax >= 0.0) {
                return Err(CliError::Usage("need dt > 0 and a finite tmax >= 0".into()));
            }
            let steps = (tmax / args.dt + 1e-9).floor() as usize;
            let times: Vec<f64> = (0..=steps).map(|i| i as f64 * args.dt).collect();
            let series = if matches!(args.mode, GluedMode::Reduced) {
                let chain = gluedtrees::reduce_to_chain(n)?;
                times.iter().map(|&t| chain.exit_kinetic(t)).collect()
            } else {
                if n > FULL_MODE_MAX_DEPTH {
                    return Err(Error::ResourceLimit(format!("full mode needs n <= {FULL_MODE_MAX_DEPTH}, got {n}")).into());
                }
                gluedtrees::full_exit_series(&gluedtrees::generate(n, args.seed)?, &times)?
            };
            let mut out = io::output(args.out.as_deref())?;
            writeln!(out, "t,exit_kinetic")?;
            for (t, e) in times.iter().zip(series) {
                writeln!(out, "{t:.16e},{e:.16e}")?;
            }
            out.flush()?;
            Ok(())
        }
        GluedMode::Solve => {
            let inst = gluedtrees::generate(n, args.seed)?;
            let report = gluedtrees::solve_instance(&inst, args.seed)?;
            let correct = report.exit_label == Some(inst.labels[inst.exit()]);
            io::write_json(args.out.as_deref(), &SolveOutput { depth: n, seed: args.seed, correct, report })
        }
        GluedMode::Spectrum => {
            let chain = gluedtrees::reduce_to_chain(n)?;
            io::write_json(args.out.as_deref(), &chain.spectral_report())
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    depth: usize,
    seed: u64,
    /// The returned label is the exit's.
    correct: bool,
    #[serde(flatten)]
    report: gluedtrees::SolveReport,
}

#[derive(Serialize)]
struct CompileOutput {
    qubits: usize,
    gates: usize,
    oscillators: usize,
    /// 1-based.
    output_index: usize,
    initial_velocity: Vec<f64>,
    network: NetworkFile,
}

fn read_circuit(path: &std::path::Path) -> Result<Circuit, CliError> {
    Ok(Circuit::from_json(&io::read_text(path)?)?)
}

pub fn bqp(cmd: BqpCommand) -> Result<(), CliError> {
    match cmd {
        BqpCommand::Compile { circuit, out } => {
            let inst = bqpred::compile(&read_circuit(&circuit)?)?;
            let report = CompileOutput {
                qubits: inst.circuit.qubits(),
                gates: inst.circuit.gates().len(),
                oscillators: inst.network.len(),
                output_index: inst.output_index + 1,
                initial_velocity: inst.initial_velocity.iter().copied().collect(),
                network: inst.network.to_file(),
            };
            io::write_json(out.as_deref(), &report)
        }
        BqpCommand::Run { circuit, t, out } => {
            let inst = bqpred::compile(&read_circuit(&circuit)?)?;
            io::write_json(out.as_deref(), &bqpred::run_instance(&inst, t)?)
        }
        BqpCommand::Decide { circuit, tmax, samples, yes, no, out } => {
            let inst = bqpred::compile(&read_circuit(&circuit)?)?;
            let times = io::time_grid(tmax, samples)?;
            let report = bqpred::decide(&inst, &times, yes, no)?;
            io::write_json(out.as_deref(), &report)?;
            if report.decision == Decision::Indeterminate {
                return Err(CliError::Indeterminate(format!(
                    "max output fraction {} lies between {no} and {yes}",
                    report.max_output_fraction
                )));
            }
            Ok(())
        }
        BqpCommand::Overlap { gates, epsilon, out } => {
            io::write_json(out.as_deref(), &bqpred::averaged_overlap(gates, epsilon)?)
        }
        BqpCommand::PerfectChain { gates, out } => io::write_json(out.as_deref(), &bqpred::perfect_chain(gates)?),
    }
}

#[derive(Serialize)]
struct VerifyOutput {
    oscillators: usize,
    padded_oscillators: usize,
    achieved_error: f64,
    predicted_error: f64,
    h_error: f64,
    spectrum_deviation: f64,
    lambda: f64,
    r: u32,
    r_mass: u32,
    r_kappa: u32,
    padded_degree: usize,
    qubits: usize,
    construction: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation_cost: Option<SimulationCost>,
}

pub fn blockenc_verify(args: VerifyArgs) -> Result<(), CliError> {
    let net = io::read_network(&args.network)?;
    let padded = blockenc::pad_to_power_of_two(&net)?;
    let base = QuantizationConfig::from_budget(args.r, &padded);
    let cfg = QuantizationConfig {
        r: args.r,
        r_mass: args.r_mass.unwrap_or(base.r_mass),
        r_kappa: args.r_kappa.unwrap_or(base.r_kappa),
    };
    let be = if args.circuit {
        blockenc::block_encode_b_circuit(&padded, cfg)?
    } else {
        blockenc::block_encode_b(&padded, cfg)?
    };
    let be_h = blockenc::block_encode_h(&be)?;
    let simulation_cost = args.t.map(|t| blockenc::simulation_cost_model(&net, t, args.epsilon)).transpose()?;
    let report = VerifyOutput {
        oscillators: net.len(),
        padded_oscillators: padded.len(),
        achieved_error: blockenc::block_error(&be, &blockenc::padded_b(&padded))?,
        predicted_error: blockenc::predicted_error(&padded, cfg)?,
        h_error: blockenc::block_error(&be_h, &blockenc::padded_h(&padded))?,
        spectrum_deviation: blockenc::spectrum_deviation(&be_h, &padded),
        lambda: be.normalization,
        r: cfg.r,
        r_mass: cfg.r_mass,
        r_kappa: cfg.r_kappa,
        padded_degree: be.padded_degree,
        qubits: be.qubits,
        construction: if args.circuit { "circuit" } else { "closed-form" },
        simulation_cost,
    };
    io::write_json(args.out.as_deref(), &report)
}

pub fn estimate(args: EstimateArgs, potential: bool) -> Result<(), CliError> {
    let net = io::read_network(&args.network)?;
    let state = io::read_state(args.state.as_deref(), net.len())?;
    let subset = if potential {
        Subset::edges(io::parse_edges(&args.subset)?)
    } else {
        Subset::vertices(io::parse_vertices(&args.subset)?)
    };
    let evolved = dynamics::evolve_exact(&net, &state, args.t)?;
    let psi = encode_primary(&net, &evolved)?;
    let report = estimate::sample_estimate(&psi, &subset, args.epsilon, args.delta, args.seed)?;
    io::write_json(args.out.as_deref(), &report)
}
