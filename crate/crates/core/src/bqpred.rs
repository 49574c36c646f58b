//! Circuits over {H, X, Toffoli} compiled into oscillator networks with a clock
//! register, the clock chain that drives them, and an engineered chain with
//! perfect end-to-end transfer.
//!
//! Within one clock site the basis index is `comp * 2 + ancilla`, with qubit 1 the
//! most significant bit of `comp`. Qubits are 1-based in circuit files.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::linalg::SymEigen;
use crate::netcore::{Spring, SpringNetwork};

pub const MAX_QUBITS: usize = 6;
pub const MAX_GATES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// Always on the last qubit.
    Hadamard,
    Not(usize),
    Toffoli(usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    /// Qubit indices are 0-based here.
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if qubits == 0 {
            return Err(invalid("circuit needs at least one qubit"));
        }
        if gates.is_empty() {
            return Err(invalid("circuit needs at least one gate"));
        }
        for (i, g) in gates.iter().enumerate() {
            let in_range = |t: usize| t < qubits;
            match *g {
                Gate::Hadamard => {
                    if i > 0 && gates[i - 1] == Gate::Hadamard {
                        return Err(invalid(format!("gates {i} and {} are consecutive Hadamards", i + 1)));
                    }
                }
                Gate::Not(t) if !in_range(t) => return Err(invalid(format!("X target {} out of range", t + 1))),
                Gate::Toffoli(a, b, t) => {
                    if !(in_range(a) && in_range(b) && in_range(t)) || a == b || a == t || b == t {
                        return Err(invalid(format!("Toffoli ({}, {}, {}) needs three distinct qubits", a + 1, b + 1, t + 1)));
                    }
                }
                Gate::Not(_) => {}
            }
        }
        Ok(Self { qubits, gates })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Dimension of one clock site, computational register plus ancilla.
    pub fn block_dim(&self) -> usize {
        1 << (self.qubits + 1)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CircuitFile = serde_json::from_str(text).map_err(|e| invalid(format!("circuit JSON: {e}")))?;
        let q = file.q;
        let index = |v: &Value| -> Result<usize> {
            match v.as_u64() {
                Some(i) if i >= 1 && (i as usize) <= q => Ok(i as usize - 1),
                _ => Err(invalid(format!("qubit index {v} outside 1..={q}"))),
            }
        };
        let mut gates = Vec::with_capacity(file.gates.len());
        for entry in &file.gates {
            let name = entry.first().and_then(Value::as_str).ok_or_else(|| invalid("gate entry needs a name"))?;
            let args = &entry[1..];
            let gate = match (name, args.len()) {
                ("H", 0) => Gate::Hadamard,
                ("H", 1) => {
                    if index(&args[0])? != q - 1 {
                        return Err(invalid("H must act on the last qubit"));
                    }
                    Gate::Hadamard
                }
                ("X", 1) => Gate::Not(index(&args[0])?),
                ("Toffoli", 3) => Gate::Toffoli(index(&args[0])?, index(&args[1])?, index(&args[2])?),
                _ => return Err(invalid(format!("unknown gate {entry:?}"))),
            };
            gates.push(gate);
        }
        Self::new(q, gates)
    }

    pub fn to_json(&self) -> String {
        let gates: Vec<Value> = self
            .gates
            .iter()
            .map(|g| match *g {
                Gate::Hadamard => serde_json::json!(["H"]),
                Gate::Not(t) => serde_json::json!(["X", t + 1]),
                Gate::Toffoli(a, b, t) => serde_json::json!(["Toffoli", a + 1, b + 1, t + 1]),
            })
            .collect();
        serde_json::to_string(&CircuitFile { q: self.qubits, gates: gates.into_iter().map(|v| v.as_array().cloned().unwrap()).collect() })
            .expect("circuit serializes")
    }

    /// Bit of qubit `t` inside a clock-site index.
    fn bit(&self, t: usize) -> usize {
        1 << (self.qubits - t)
    }

    fn permutation(&self, f: impl Fn(usize) -> usize) -> DMatrix<f64> {
        let dim = self.block_dim();
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            m[(f(r), r)] = 1.0;
        }
        m
    }

    fn classical(&self, g: Gate) -> Option<DMatrix<f64>> {
        match g {
            Gate::Hadamard => None,
            Gate::Not(t) => Some(self.permutation(|r| r ^ self.bit(t))),
            Gate::Toffoli(a, b, t) => {
                let (ca, cb, ct) = (self.bit(a), self.bit(b), self.bit(t));
                Some(self.permutation(|r| if r & ca != 0 && r & cb != 0 { r ^ ct } else { r }))
            }
        }
    }

    /// Nonnegative gate block `W_l`.
    pub fn encoded_gate(&self, g: Gate) -> DMatrix<f64> {
        self.classical(g).unwrap_or_else(|| {
            let dim = self.block_dim();
            let w = std::f64::consts::FRAC_1_SQRT_2;
            let mut m = DMatrix::zeros(dim, dim);
            for r in 0..dim {
                let base = r & !3;
                let anc = r & 1;
                m[(base | anc, r)] += w;
                let flipped = if r & 2 == 0 { anc } else { 1 - anc };
                m[(base | 2 | flipped, r)] += w;
            }
            m
        })
    }

    /// The gate itself, tensored with the identity on the ancilla.
    pub fn plain_gate(&self, g: Gate) -> DMatrix<f64> {
        self.classical(g).unwrap_or_else(|| {
            let dim = self.block_dim();
            let w = std::f64::consts::FRAC_1_SQRT_2;
            let mut m = DMatrix::zeros(dim, dim);
            for r in 0..dim {
                let base = r & !2;
                m[(base, r)] = w;
                m[(base | 2, r)] = if r & 2 == 0 { w } else { -w };
            }
            m
        })
    }

    /// `U_l ... U_1 |0>` for `l = 0..=L`, on the computational register (ancilla dropped).
    pub fn history(&self) -> Vec<DVector<f64>> {
        let dim = self.block_dim();
        // ancilla |0> then strip it: the gates never touch the ancilla
        let mut state = DVector::zeros(dim);
        state[0] = 1.0;
        let mut out = vec![strip_ancilla(&state)];
        for g in &self.gates {
            state = self.plain_gate(*g) * state;
            out.push(strip_ancilla(&state));
        }
        out
    }
}

fn strip_ancilla(v: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len() / 2, |i, _| v[2 * i] + v[2 * i + 1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CircuitFile {
    q: usize,
    gates: Vec<Vec<Value>>,
}

fn check_size(c: &Circuit) -> Result<()> {
    if c.qubits() > MAX_QUBITS || c.gates().len() > MAX_GATES {
        return Err(Error::ResourceLimit(format!(
            "circuit with {} qubits and {} gates exceeds q <= {MAX_QUBITS}, L <= {MAX_GATES}",
            c.qubits(),
            c.gates().len()
        )));
    }
    Ok(())
}

/// `4 I - sum_l (|l+1><l| (x) W_l + h.c.)` for a list of clock-link blocks.
fn clock_matrix(blocks: &[DMatrix<f64>], dim: usize) -> DMatrix<f64> {
    let sites = blocks.len() + 1;
    let mut a = DMatrix::from_diagonal_element(sites * dim, sites * dim, 4.0);
    for (l, w) in blocks.iter().enumerate() {
        let (from, to) = (l * dim, (l + 1) * dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(to + i, from + j)] -= w[(i, j)];
                a[(from + j, to + i)] -= w[(i, j)];
            }
        }
    }
    a
}

#[derive(Debug, Clone)]
pub struct BqpInstance {
    pub circuit: Circuit,
    pub a: DMatrix<f64>,
    pub network: SpringNetwork,
    /// Oscillator at the last clock site, all qubits and ancilla zero.
    pub output_index: usize,
    pub initial_velocity: DVector<f64>,
}

pub fn compile(circuit: &Circuit) -> Result<BqpInstance> {
    check_size(circuit)?;
    let dim = circuit.block_dim();
    let blocks: Vec<DMatrix<f64>> = circuit.gates().iter().map(|g| circuit.encoded_gate(*g)).collect();
    let a = clock_matrix(&blocks, dim);
    let n = a.nrows();
    let mut springs = Vec::new();
    for j in 0..n {
        let mut coupled = 0.0;
        for k in 0..n {
            if k != j && a[(j, k)] != 0.0 {
                coupled -= a[(j, k)];
                if k > j {
                    springs.push(Spring { j, k, kappa: -a[(j, k)] });
                }
            }
        }
        springs.push(Spring { j, k: j, kappa: a[(j, j)] - coupled });
    }
    let network = SpringNetwork::with_minimal_sparsity(vec![1.0; n], springs)?;
    let mut initial_velocity = DVector::zeros(n);
    initial_velocity[0] = 1.0;
    initial_velocity[1] = -1.0;
    Ok(BqpInstance { circuit: circuit.clone(), a, network, output_index: circuit.gates().len() * dim, initial_velocity })
}

/// Same clock construction with each `W_l` replaced by the bare gate.
pub fn reference_matrix(circuit: &Circuit) -> DMatrix<f64> {
    let blocks: Vec<DMatrix<f64>> = circuit.gates().iter().map(|g| circuit.plain_gate(*g)).collect();
    clock_matrix(&blocks, circuit.block_dim())
}

/// `S X S^T` with `S = sum_l |l+1><l+1| (x) U_l ... U_1` and `X = (4 I - hop) (x) I`.
pub fn clock_conjugation(circuit: &Circuit) -> DMatrix<f64> {
    let dim = circuit.block_dim();
    let sites = circuit.gates().len() + 1;
    let identities: Vec<DMatrix<f64>> = (1..sites).map(|_| DMatrix::identity(dim, dim)).collect();
    let x = clock_matrix(&identities, dim);
    let mut s = DMatrix::zeros(sites * dim, sites * dim);
    let mut prefix = DMatrix::identity(dim, dim);
    for l in 0..sites {
        if l > 0 {
            prefix = circuit.plain_gate(circuit.gates()[l - 1]) * prefix;
        }
        s.view_mut((l * dim, l * dim), (dim, dim)).copy_from(&prefix);
    }
    &s * x * s.transpose()
}

/// Precomputed `cos(sqrt(A) t)` action on the initial velocity.
pub struct InstanceDynamics {
    eig: SymEigen,
    coeffs: DVector<f64>,
}

impl InstanceDynamics {
    pub fn new(a: &DMatrix<f64>, v0: &DVector<f64>) -> Result<Self> {
        let eig = SymEigen::new(a).clip_psd()?;
        let coeffs = eig.vectors.tr_mul(v0);
        Ok(Self { eig, coeffs })
    }

    pub fn velocities(&self, t: f64) -> DVector<f64> {
        let phased = DVector::from_fn(self.coeffs.len(), |i, _| self.coeffs[i] * (self.eig.values[i].sqrt() * t).cos());
        &self.eig.vectors * phased
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub t: f64,
    /// Kinetic energy of the output oscillator over `E = 1`.
    pub output_fraction: f64,
    /// Output oscillator plus its ancilla partner; the ancilla `|->` splits the weight evenly.
    pub output_pair_fraction: f64,
    /// Clock-chain amplitude `alpha_{L+1}(t)`.
    pub clock_alpha: f64,
    /// Max gap between the velocities and the clock-history prediction.
    pub structural_deviation: f64,
    pub velocities: Vec<f64>,
}

pub fn run_instance(inst: &BqpInstance, t: f64) -> Result<RunReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time {t} must be finite and non-negative")));
    }
    check_size(&inst.circuit)?;
    let dynamics = InstanceDynamics::new(&inst.a, &inst.initial_velocity)?;
    Ok(report_at(inst, &dynamics, t))
}

fn report_at(inst: &BqpInstance, dynamics: &InstanceDynamics, t: f64) -> RunReport {
    let v = dynamics.velocities(t);
    let out = inst.output_index;
    RunReport {
        t,
        output_fraction: 0.5 * v[out] * v[out],
        output_pair_fraction: 0.5 * (v[out] * v[out] + v[out + 1] * v[out + 1]),
        clock_alpha: chain_alpha(inst.circuit.gates().len(), t),
        structural_deviation: (&v - structural_velocities(&inst.circuit, t)).amax(),
        velocities: v.iter().copied().collect(),
    }
}

/// `sqrt 2 sum_l alpha_l(t) |l> (x) U_{l-1}..U_0|0> (x) |->`, the predicted velocity vector.
pub fn structural_velocities(circuit: &Circuit, t: f64) -> DVector<f64> {
    let sites = circuit.gates().len() + 1;
    let dim = circuit.block_dim();
    let alphas = clock_alphas(circuit.gates().len(), t);
    let mut out = DVector::zeros(sites * dim);
    for (l, phi) in circuit.history().iter().enumerate() {
        for (c, amp) in phi.iter().enumerate() {
            // sqrt 2 |-> = |0> - |1>
            out[l * dim + 2 * c] = alphas[l] * amp;
            out[l * dim + 2 * c + 1] = -alphas[l] * amp;
        }
    }
    out
}

/// `4 I - (shift + shift^T)` on `L + 1` sites.
pub fn clock_chain(gates: usize) -> DMatrix<f64> {
    let sites = gates + 1;
    DMatrix::from_fn(sites, sites, |i, j| {
        if i == j {
            4.0
        } else if i.abs_diff(j) == 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `<l|cos(sqrt(X') t)|1>` for every site, by eigensolve.
pub fn clock_alphas(gates: usize, t: f64) -> Vec<f64> {
    let eig = SymEigen::new(&clock_chain(gates));
    let coeffs = DVector::from_fn(gates + 1, |k, _| eig.vectors[(0, k)] * (eig.values[k].sqrt() * t).cos());
    (&eig.vectors * coeffs).iter().copied().collect()
}

/// `alpha_{L+1}(t)` from the sine eigenbasis of the clock chain.
pub fn chain_alpha(gates: usize, t: f64) -> f64 {
    let m = (gates + 2) as f64;
    let sum: f64 = (1..=gates + 1)
        .map(|l| {
            let theta = std::f64::consts::PI * l as f64 / m;
            let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
            sign * theta.sin().powi(2) * ((4.0 - 2.0 * theta.cos()).sqrt() * t).cos()
        })
        .sum();
    2.0 / m * sum
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedOverlap {
    pub average: f64,
    pub target: f64,
    pub deviation: f64,
    pub within_bound: bool,
    pub epsilon: f64,
    /// Number of summed uniforms.
    pub terms: u32,
    /// Each uniform ranges over `0..=t_prime`.
    pub t_prime: u64,
    pub support: usize,
    /// A support point with `alpha^2` at least the average.
    pub witness_time: u64,
}

/// Law of the sum of `terms` uniforms on `0..=span`, as integer counts.
pub fn uniform_sum_counts(terms: u32, span: u64) -> Vec<u128> {
    let mut counts = vec![1u128];
    for _ in 0..terms {
        let next_len = counts.len() + span as usize;
        let mut prefix = vec![0u128; counts.len() + 1];
        for (i, c) in counts.iter().enumerate() {
            prefix[i + 1] = prefix[i] + c;
        }
        counts = (0..next_len)
            .map(|s| {
                let hi = s.min(counts.len() - 1);
                let lo = s.saturating_sub(span as usize);
                if lo > hi {
                    0
                } else {
                    prefix[hi + 1] - prefix[lo]
                }
            })
            .collect();
    }
    counts
}

pub fn averaged_overlap(gates: usize, eps: f64) -> Result<AveragedOverlap> {
    if gates == 0 {
        return Err(invalid("clock chain needs at least one gate"));
    }
    if !(eps > 0.0 && eps < 0.25) {
        return Err(invalid(format!("epsilon {eps} outside (0, 1/4)")));
    }
    let terms = (1.0 / eps).log2().ceil() as u32 + 1;
    let t_prime = 10 * (gates as u64 + 2).pow(2);
    if (terms as f64) * ((t_prime + 1) as f64).log2() >= 127.0 {
        return Err(Error::ResourceLimit("uniform-sum counts overflow 128 bits".into()));
    }
    let counts = uniform_sum_counts(terms, t_prime);
    let total = (t_prime as u128 + 1).pow(terms);
    debug_assert_eq!(counts.iter().sum::<u128>(), total);
    let alpha_sq: Vec<f64> = (0..counts.len()).map(|t| chain_alpha(gates, t as f64).powi(2)).collect();
    let average = counts.iter().zip(&alpha_sq).map(|(c, a)| *c as f64 * a).sum::<f64>() / total as f64;
    let target = 3.0 / (4.0 * (gates as f64 + 2.0));
    let witness_time = alpha_sq.iter().position(|a| *a >= average).unwrap_or(0) as u64;
    Ok(AveragedOverlap {
        average,
        target,
        deviation: (average - target).abs(),
        within_bound: (average - target).abs() <= 2.0 * eps,
        epsilon: eps,
        terms,
        t_prime,
        support: counts.len(),
        witness_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Yes,
    No,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionReport {
    pub decision: Decision,
    pub max_output_fraction: f64,
    pub best_time: f64,
}

/// Yes when some sampled time puts at least `yes_threshold` on the output, no when all stay at or below `no_threshold`.
pub fn decide(inst: &BqpInstance, times: &[f64], yes_threshold: f64, no_threshold: f64) -> Result<DecisionReport> {
    if times.is_empty() {
        return Err(invalid("no sample times"));
    }
    if !(no_threshold >= 0.0 && no_threshold < yes_threshold && yes_threshold <= 1.0) {
        return Err(invalid("need 0 <= no_threshold < yes_threshold <= 1"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("sample times must be finite and non-negative"));
    }
    check_size(&inst.circuit)?;
    let dynamics = InstanceDynamics::new(&inst.a, &inst.initial_velocity)?;
    let (best_time, max_output_fraction) = times
        .iter()
        .map(|&t| (t, report_at(inst, &dynamics, t).output_fraction))
        .fold((times[0], f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    let decision = if max_output_fraction >= yes_threshold {
        Decision::Yes
    } else if max_output_fraction <= no_threshold {
        Decision::No
    } else {
        Decision::Indeterminate
    };
    Ok(DecisionReport { decision, max_output_fraction, best_time })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfectChainReport {
    pub gates: usize,
    pub diagonal: Vec<f64>,
    /// `u_1..u_L`; the chain couples sites `l` and `l+1` with `-sqrt(u_l)`.
    pub couplings: Vec<f64>,
    pub persymmetric: bool,
    pub couplings_positive: bool,
    pub inequality_ok: bool,
    pub half_step_inequality_ok: bool,
    pub eigenvalues: Vec<f64>,
    /// Max deviation from `(L + k + 1/2)^2 / 4`, `k = 0..=L`.
    pub deviation_from_k0: f64,
    /// Max deviation from `(L + k + 1/2)^2 / 4`, `k = 1..=L+1`.
    pub deviation_from_k1: f64,
    /// `"k=0..L"` or `"k=1..L+1"`, whichever matches.
    pub matching_indexing: String,
    /// Max over the grid of `|<L+1| exp(i sqrt(X') t) |1>|`.
    pub transfer_exp: f64,
    pub transfer_exp_time: f64,
    /// Max over the grid of `|<L+1| cos(sqrt(X') t) |1>|`.
    pub transfer_cos: f64,
    pub transfer_cos_time: f64,
}

/// Grid points on `[0, 4 pi]`; `2 pi` sits exactly at the midpoint.
pub const TRANSFER_GRID: usize = 4000;

fn diagonal_coeff(gates: usize, l: f64) -> f64 {
    let lp = gates as f64 + 1.0;
    (2.5 * lp * lp - 0.25 - 2.0 * (l - gates as f64 / 2.0).powi(2)) / 4.0
}

fn coupling_coeff(gates: usize, l: f64) -> f64 {
    let lp = gates as f64 + 1.0;
    l * (2.0 * lp - l) * (lp * lp - l * l) / 16.0
}

pub fn perfect_chain_matrix(gates: usize) -> DMatrix<f64> {
    let sites = gates + 1;
    let mut m = DMatrix::zeros(sites, sites);
    for l in 0..sites {
        m[(l, l)] = diagonal_coeff(gates, l as f64);
    }
    for l in 1..sites {
        let c = coupling_coeff(gates, l as f64).sqrt();
        m[(l - 1, l)] = -c;
        m[(l, l - 1)] = -c;
    }
    m
}

pub fn perfect_chain(gates: usize) -> Result<PerfectChainReport> {
    if gates == 0 {
        return Err(invalid("perfect chain needs L >= 1"));
    }
    let sites = gates + 1;
    let diagonal: Vec<f64> = (0..sites).map(|l| diagonal_coeff(gates, l as f64)).collect();
    let couplings: Vec<f64> = (1..sites).map(|l| coupling_coeff(gates, l as f64)).collect();
    let u = |l: usize| if l == 0 || l > gates { 0.0 } else { couplings[l - 1] };
    let tol = 1e-12 * diagonal.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let persymmetric = (0..sites).all(|l| (diagonal[l] - diagonal[gates - l]).abs() <= tol)
        && (1..sites).all(|l| (u(l) - u(sites - l)).abs() <= tol);
    let inequality_ok =
        (0..sites).all(|l| diagonal[l] >= std::f64::consts::SQRT_2 * (u(l).sqrt() + u(l + 1).sqrt()));
    let half_step_inequality_ok =
        (0..sites).all(|l| diagonal[l].powi(2) >= 8.0 * coupling_coeff(gates, l as f64 + 0.5));

    let eig = SymEigen::new(&perfect_chain_matrix(gates));
    let eigenvalues: Vec<f64> = eig.values.iter().copied().collect();
    let predicted = |k: usize| (gates as f64 + k as f64 + 0.5).powi(2) / 4.0;
    let deviation = |offset: usize| {
        eigenvalues.iter().enumerate().map(|(i, v)| (v - predicted(i + offset)).abs()).fold(0.0, f64::max)
    };
    let (deviation_from_k0, deviation_from_k1) = (deviation(0), deviation(1));
    let matching_indexing = if deviation_from_k1 < deviation_from_k0 { "k=1..L+1" } else { "k=0..L" }.to_string();

    // amplitudes <L+1| f(sqrt X' t) |1> from the eigenbasis
    let ends: Vec<(f64, f64)> =
        (0..sites).map(|k| (eig.values[k].max(0.0).sqrt(), eig.vectors[(gates, k)] * eig.vectors[(0, k)])).collect();
    let half = TRANSFER_GRID / 2;
    let mut best_exp = (0.0, 0.0);
    let mut best_cos = (0.0, 0.0);
    for i in 0..=TRANSFER_GRID {
        let t = std::f64::consts::TAU * (i as f64 / half as f64);
        let (mut re, mut im, mut cs) = (0.0, 0.0, 0.0);
        for &(w, c) in &ends {
            let (s, co) = (w * t).sin_cos();
            re += c * co;
            im += c * s;
            cs += c * co;
        }
        let amp = re.hypot(im);
        if amp > best_exp.0 {
            best_exp = (amp, t);
        }
        if cs.abs() > best_cos.0 {
            best_cos = (cs.abs(), t);
        }
    }
    Ok(PerfectChainReport {
        gates,
        diagonal,
        couplings_positive: couplings.iter().all(|u| *u > 0.0),
        couplings,
        persymmetric,
        inequality_ok,
        half_step_inequality_ok,
        eigenvalues,
        deviation_from_k0,
        deviation_from_k1,
        matching_indexing,
        transfer_exp: best_exp.0,
        transfer_exp_time: best_exp.1,
        transfer_cos: best_cos.0,
        transfer_cos_time: best_cos.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_not_compiles_to_eight_oscillators() {
        let c = Circuit::new(1, vec![Gate::Not(0)]).unwrap();
        let inst = compile(&c).unwrap();
        assert_eq!(inst.a.nrows(), 8);
        let block = inst.a.view((4, 0), (4, 4));
        assert!(block.iter().all(|v| *v == 0.0 || *v == -1.0));
        assert_eq!(block.iter().filter(|v| **v == -1.0).count(), 4);
    }

    #[test]
    fn consecutive_hadamards_rejected() {
        assert!(Circuit::new(1, vec![Gate::Hadamard, Gate::Hadamard]).is_err());
        assert!(Circuit::from_json(r#"{"q": 2, "gates": [["H", 1]]}"#).is_err());
        assert!(Circuit::from_json(r#"{"q": 2, "gates": [["H", 2], ["X", 1], ["H"]]}"#).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let c = Circuit::from_json(r#"{"q": 3, "gates": [["Toffoli", 1, 2, 3], ["H"], ["X", 2]]}"#).unwrap();
        assert_eq!(c.gates()[0], Gate::Toffoli(0, 1, 2));
        assert_eq!(Circuit::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn encoded_hadamard_on_minus_ancilla() {
        let c = Circuit::new(1, vec![Gate::Hadamard]).unwrap();
        let w = c.encoded_gate(Gate::Hadamard);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // |b>|-> -> (H|b>)|->
        let minus = |b: usize| DVector::from_fn(4, |i, _| if i >> 1 == b { if i & 1 == 0 { r } else { -r } } else { 0.0 });
        let h0 = (minus(0) + minus(1)) * r;
        let h1 = (minus(0) - minus(1)) * r;
        assert!((&w * minus(0) - h0).amax() < 1e-15);
        assert!((&w * minus(1) - h1).amax() < 1e-15);
        assert!(w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn alpha_closed_form_small() {
        assert!(chain_alpha(3, 0.0).abs() < 1e-15);
        let t = 1.3;
        let expect = 0.5 * ((3f64.sqrt() * t).cos() - (5f64.sqrt() * t).cos());
        assert!((chain_alpha(1, t) - expect).abs() < 1e-14);
    }

    #[test]
    fn uniform_sum_counts_total() {
        let counts = uniform_sum_counts(3, 4);
        assert_eq!(counts.len(), 13);
        assert_eq!(counts.iter().sum::<u128>(), 125);
        assert_eq!(counts[0], 1);
        assert_eq!(counts[6], 19);
    }

    #[test]
    fn double_not_returns_to_output() {
        let c = Circuit::new(1, vec![Gate::Not(0), Gate::Not(0)]).unwrap();
        let inst = compile(&c).unwrap();
        let r = run_instance(&inst, 2.7).unwrap();
        assert!(r.structural_deviation < 1e-10);
        assert!((r.output_fraction - 0.5 * r.clock_alpha.powi(2)).abs() < 1e-10);
        assert!((r.output_pair_fraction - r.clock_alpha.powi(2)).abs() < 1e-10);
    }

    #[test]
    fn compiled_network_recovers_a() {
        let c = Circuit::new(2, vec![Gate::Hadamard, Gate::Not(0), Gate::Hadamard]).unwrap();
        let inst = compile(&c).unwrap();
        assert!(inst.network.sparsity() <= 4);
        let mats = crate::netcore::build_matrices(&inst.network);
        assert!((&mats.a - &inst.a).amax() < 1e-14);
    }

    #[test]
    fn perfect_chain_l1() {
        let r = perfect_chain(1).unwrap();
        assert_eq!(r.diagonal, vec![2.3125, 2.3125]);
        assert_eq!(r.couplings, vec![0.5625]);
        assert!((r.eigenvalues[0] - 1.5625).abs() < 1e-12 && (r.eigenvalues[1] - 3.0625).abs() < 1e-12);
    }
}
