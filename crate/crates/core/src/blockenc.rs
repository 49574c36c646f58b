//! Block encodings of `B` and `H` built from sparse oracle access to masses and
//! spring constants, plus the cost bookkeeping for simulating the network.
//!
//! Register layout for the `B` circuit, most significant first: row register
//! (`n` qubits), column register (`n` qubits), inequality register (`r` qubits),
//! inequality flag, swap flag. All amplitudes are real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{is_power_of_two, spectral_norm, SymEigen};
use crate::netcore::{build_matrices, pair_index, SpringNetwork};

/// Largest register dimension `N^2 2^(r+2)` simulated gate by gate.
pub const CIRCUIT_STATE_CAP: usize = 1 << 24;
/// Largest dimension for which the full unitary is materialized.
pub const FULL_UNITARY_CAP: usize = 1 << 11;

/// `floor(value / max * 2^bits)`, saturating at `2^bits`.
pub fn quantize(value: f64, max: f64, bits: u32) -> Result<u64> {
    if !(max > 0.0 && max.is_finite()) || !(value >= 0.0 && value <= max) || bits > 52 {
        return Err(invalid(format!("cannot quantize {value} against {max} with {bits} bits")));
    }
    let top = 1u64 << bits;
    Ok(((value / max * top as f64).floor() as u64).min(top))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuantizationConfig {
    /// Qubits in the inequality register.
    pub r: u32,
    pub r_mass: u32,
    pub r_kappa: u32,
}

impl QuantizationConfig {
    /// Splits a budget of `r` bits so that every error source shrinks like `2^-r`.
    pub fn from_budget(r: u32, net: &SpringNetwork) -> Self {
        let spread = (net.mass_max() / net.mass_min()).log2().ceil().max(0.0) as u32;
        Self { r, r_mass: r + spread, r_kappa: 2 * r }
    }

    fn check(&self) -> Result<()> {
        if self.r == 0 || self.r > 24 || self.r_mass == 0 || self.r_mass > 40 || self.r_kappa == 0 || self.r_kappa > 48 {
            return Err(invalid(format!("unsupported bit widths {self:?}")));
        }
        Ok(())
    }
}

/// Quantized oracle values with the integer comparator shared by both constructions.
struct Oracle {
    n: usize,
    adjacency: Vec<Vec<(usize, u64)>>,
    mass_bits: Vec<u64>,
    /// `m_max / m_min`.
    spread: f64,
    cfg: QuantizationConfig,
    padded_degree: usize,
}

impl Oracle {
    fn new(net: &SpringNetwork, cfg: QuantizationConfig) -> Result<Self> {
        cfg.check()?;
        let n = net.len();
        if !is_power_of_two(n) {
            return Err(invalid(format!("N = {n} is not a power of two")));
        }
        if net.kappa_max() == 0.0 {
            return Err(Error::Degenerate("network has no springs".into()));
        }
        let (m_max, k_max) = (net.mass_max(), net.kappa_max());
        let mass_bits = net.masses().iter().map(|&m| quantize(m, m_max, cfg.r_mass)).collect::<Result<Vec<_>>>()?;
        if mass_bits.contains(&0) {
            return Err(invalid(format!("r_mass = {} quantizes a mass to zero", cfg.r_mass)));
        }
        let adjacency = net
            .adjacency()
            .into_iter()
            .map(|row| row.into_iter().map(|(k, kap)| quantize(kap, k_max, cfg.r_kappa).map(|q| (k, q))).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(Self {
            n,
            adjacency,
            mass_bits,
            spread: m_max / net.mass_min(),
            cfg,
            // a row never has more than N entries, and the column register holds N values
            padded_degree: net.sparsity().min(n).next_power_of_two(),
        })
    }

    fn kappa_bits(&self, j: usize, k: usize) -> u64 {
        self.adjacency[j].iter().find(|(c, _)| *c == k).map_or(0, |(_, q)| *q)
    }

    /// `x^2 aleph m / 2^(2r) <= kappa` with both sides on their quantized grids.
    fn passes(&self, j: usize, kappa_bits: u64, x: u64) -> bool {
        let lhs = (x * x) as f64 * self.spread * self.mass_bits[j] as f64 * (self.cfg.r_kappa as f64).exp2();
        let rhs = ((2 * self.cfg.r + self.cfg.r_mass) as f64).exp2() * kappa_bits as f64;
        lhs <= rhs
    }

    /// Number of `x` in `1..=2^r` passing the test.
    fn count(&self, j: usize, kappa_bits: u64) -> u64 {
        let (mut lo, mut hi) = (0u64, 1u64 << self.cfg.r);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.passes(j, kappa_bits, mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// `j`-th row of the neighbor table: real neighbors first, then padding columns.
    fn neighbor_table(&self, j: usize) -> Vec<usize> {
        let mut table: Vec<usize> = self.adjacency[j].iter().map(|(k, _)| *k).collect();
        let rest: Vec<usize> = (0..self.n).filter(|k| !table.contains(k)).collect();
        table.extend(rest);
        table
    }

    fn normalization(&self, net: &SpringNetwork) -> f64 {
        (2.0 * net.aleph() * self.padded_degree as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct BlockEncoding {
    /// The extracted top-left block.
    pub block: DMatrix<f64>,
    /// Subnormalization: `block ~ target / normalization`.
    pub normalization: f64,
    pub qubits: usize,
    pub config: QuantizationConfig,
    /// Sparsity rounded up to a power of two.
    pub padded_degree: usize,
}

/// `B` in the padded `N x N^2` layout, column `(j, k)` at `j N + k`.
pub fn padded_b(net: &SpringNetwork) -> DMatrix<f64> {
    let n = net.len();
    let b = build_matrices(net).b;
    let mut out = DMatrix::zeros(n, n * n);
    for c in b.columns() {
        out[(c.j, c.j * n + c.k)] += c.coef_j;
        if c.j != c.k {
            out[(c.k, c.j * n + c.k)] -= c.coef_k;
        }
    }
    out
}

/// `-[[0, B~], [B~^T, 0]]` on one qubit plus two `n`-qubit registers, `B~` mapping into column register `|0>`.
pub fn padded_h(net: &SpringNetwork) -> DMatrix<f64> {
    let n = net.len();
    let mut landing = vec![0.0; n];
    landing[0] = 1.0;
    embed_h(&padded_b(net), n, &landing)
}

/// Places `B` rows into column-register states weighted by `landing`, then symmetrizes.
fn embed_h(b_block: &DMatrix<f64>, n: usize, landing: &[f64]) -> DMatrix<f64> {
    let half = n * n;
    let mut h = DMatrix::zeros(2 * half, 2 * half);
    for i in 0..n {
        for (s, w) in landing.iter().enumerate().filter(|(_, w)| **w != 0.0) {
            for col in 0..half {
                let v = w * b_block[(i, col)];
                h[(i * n + s, half + col)] = -v;
                h[(half + col, i * n + s)] = -v;
            }
        }
    }
    h
}

/// Block of `B` assembled from the closed-form amplitude of each circuit path.
/// Appends decoupled masses up to the next power of two. They carry `m_max` so that
/// `aleph` and the mass quantization are unchanged.
pub fn pad_to_power_of_two(net: &SpringNetwork) -> Result<SpringNetwork> {
    let n = net.len();
    if is_power_of_two(n) {
        return Ok(net.clone());
    }
    let mut masses = net.masses().to_vec();
    masses.resize(n.next_power_of_two(), net.mass_max());
    SpringNetwork::new(masses, net.springs().to_vec(), net.sparsity())
}

pub fn block_encode_b(net: &SpringNetwork, cfg: QuantizationConfig) -> Result<BlockEncoding> {
    let oracle = Oracle::new(net, cfg)?;
    let n = net.len();
    let amp = |j: usize, k: usize| {
        let count = oracle.count(j, oracle.kappa_bits(j, k));
        count as f64 / (1u64 << cfg.r) as f64 / (2.0 * oracle.padded_degree as f64).sqrt()
    };
    let mut block = DMatrix::zeros(n, n * n);
    for j in 0..n {
        for &(k, _) in &oracle.adjacency[j] {
            // row j carries +, the swapped path for k < j carries -
            if k >= j {
                block[(j, j * n + k)] = amp(j, k);
            } else {
                block[(j, k * n + j)] = -amp(j, k);
            }
        }
    }
    Ok(BlockEncoding {
        block,
        normalization: oracle.normalization(net),
        qubits: 2 * n.trailing_zeros() as usize + cfg.r as usize + 2,
        config: cfg,
        padded_degree: oracle.padded_degree,
    })
}

struct Circuit<'a> {
    oracle: &'a Oracle,
    n: usize,
    x_dim: usize,
}

impl Circuit<'_> {
    fn dim(&self) -> usize {
        self.n * self.n * self.x_dim * 4
    }

    fn index(&self, row: usize, col: usize, x: usize, flags: usize) -> usize {
        ((row * self.n + col) * self.x_dim + x) * 4 + flags
    }

    fn hadamard(state: &mut [f64], stride: usize) {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for base in (0..state.len()).step_by(2 * stride) {
            for i in base..base + stride {
                let (a, b) = (state[i], state[i + stride]);
                state[i] = (a + b) * r;
                state[i + stride] = (a - b) * r;
            }
        }
    }

    /// Permutes basis states: `dst[f(i)] = src[i]`.
    fn permute(state: &mut Vec<f64>, f: impl Fn(usize) -> usize) {
        let mut out = vec![0.0; state.len()];
        for (i, v) in state.iter().enumerate() {
            out[f(i)] = *v;
        }
        *state = out;
    }

    fn split(&self, i: usize) -> (usize, usize, usize, usize) {
        let flags = i % 4;
        let rest = i / 4;
        let x = rest % self.x_dim;
        let pair = rest / self.x_dim;
        (pair / self.n, pair % self.n, x, flags)
    }

    /// `U_B^dagger` applied to a state of the full register.
    fn apply_adjoint(&self, state: &mut Vec<f64>) {
        let o = self.oracle;
        let low_bits = o.padded_degree.trailing_zeros() as usize;
        let col_stride = self.x_dim * 4;
        for b in 0..low_bits {
            Self::hadamard(state, col_stride << b);
        }
        let tables: Vec<Vec<usize>> = (0..self.n).map(|j| o.neighbor_table(j)).collect();
        Self::permute(state, |i| {
            let (row, l, x, f) = self.split(i);
            self.index(row, tables[row][l], x, f)
        });
        let x_bits = o.cfg.r as usize;
        for b in 0..x_bits {
            Self::hadamard(state, 4 << b);
        }
        // comparator flips the inequality flag on failure
        Self::permute(state, |i| {
            let (row, col, x, f) = self.split(i);
            let pass = o.passes(row, o.kappa_bits(row, col), x as u64 + 1);
            if pass {
                i
            } else {
                self.index(row, col, x, f ^ 2)
            }
        });
        for b in 0..x_bits {
            Self::hadamard(state, 4 << b);
        }
        Self::permute(state, |i| {
            let (row, col, x, f) = self.split(i);
            let swap_flag = f & 1;
            if (col < row && swap_flag == 0) || (col > row && swap_flag == 1) {
                self.index(col, row, x, f ^ 1)
            } else {
                i
            }
        });
        // H Z on the swap flag
        for i in (0..state.len()).filter(|i| i % 2 == 1) {
            state[i] = -state[i];
        }
        Self::hadamard(state, 1);
    }
}

/// Same block as [`block_encode_b`], obtained by pushing each input column through the gates.
pub fn block_encode_b_circuit(net: &SpringNetwork, cfg: QuantizationConfig) -> Result<BlockEncoding> {
    let oracle = Oracle::new(net, cfg)?;
    let n = net.len();
    let circuit = Circuit { oracle: &oracle, n, x_dim: 1 << cfg.r };
    if circuit.dim() > CIRCUIT_STATE_CAP {
        return Err(Error::ResourceLimit(format!("register of dimension {} exceeds {CIRCUIT_STATE_CAP}", circuit.dim())));
    }
    let mut block = DMatrix::zeros(n, n * n);
    for j in 0..n {
        let mut state = vec![0.0; circuit.dim()];
        state[circuit.index(j, 0, 0, 0)] = 1.0;
        circuit.apply_adjoint(&mut state);
        for pair in 0..n * n {
            block[(j, pair)] = state[circuit.index(pair / n, pair % n, 0, 0)];
        }
    }
    Ok(BlockEncoding {
        block,
        normalization: oracle.normalization(net),
        qubits: 2 * n.trailing_zeros() as usize + cfg.r as usize + 2,
        config: cfg,
        padded_degree: oracle.padded_degree,
    })
}

/// Full unitary `U_B` of the circuit; only for tiny registers.
pub fn circuit_unitary(net: &SpringNetwork, cfg: QuantizationConfig) -> Result<DMatrix<f64>> {
    let oracle = Oracle::new(net, cfg)?;
    let circuit = Circuit { oracle: &oracle, n: net.len(), x_dim: 1 << cfg.r };
    let dim = circuit.dim();
    if dim > FULL_UNITARY_CAP {
        return Err(Error::ResourceLimit(format!("unitary of dimension {dim} exceeds {FULL_UNITARY_CAP}")));
    }
    let mut adjoint = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let mut state = vec![0.0; dim];
        state[i] = 1.0;
        circuit.apply_adjoint(&mut state);
        adjoint.set_column(i, &DVector::from_vec(state));
    }
    Ok(adjoint.transpose())
}

/// Reflection `|+><+| (x) (2|0><0| - I) + |-><-| (x) I` on one qubit and an `n`-qubit register.
pub fn conditional_reflection(register_dim: usize) -> DMatrix<f64> {
    let mut reflect = -DMatrix::identity(register_dim, register_dim);
    reflect[(0, 0)] = 1.0;
    let plus = DMatrix::from_element(2, 2, 0.5);
    let minus = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
    plus.kronecker(&reflect) + minus.kronecker(&DMatrix::identity(register_dim, register_dim))
}

/// Block of `H` from a block of `B`, routed through [`conditional_reflection`].
pub fn block_encode_h(be: &BlockEncoding) -> Result<BlockEncoding> {
    let n = be.block.nrows();
    if be.block.ncols() != n * n {
        return Err(invalid("expected an N x N^2 block"));
    }
    let reflection = conditional_reflection(n);
    // <0| U_cond |0> on the extra qubit: projector onto |0> of the column register
    let projector = reflection.view((0, 0), (n, n)).into_owned();
    let landing: Vec<f64> = projector.column(0).iter().copied().collect();
    Ok(BlockEncoding { block: embed_h(&be.block, n, &landing), qubits: be.qubits + 2, ..be.clone() })
}

/// `|| block - target / normalization ||_2`.
pub fn block_error(be: &BlockEncoding, target: &DMatrix<f64>) -> Result<f64> {
    if be.block.shape() != target.shape() {
        return Err(invalid("block and target shapes differ"));
    }
    Ok(spectral_norm(&(&be.block - target / be.normalization)))
}

/// A priori bound on `|| block - B / normalization ||` for the given bit widths.
pub fn predicted_error(net: &SpringNetwork, cfg: QuantizationConfig) -> Result<f64> {
    let oracle = Oracle::new(net, cfg)?;
    let (m_max, m_min) = (net.mass_max(), net.mass_min());
    let worst = (0..net.len())
        .map(|j| {
            let m = net.masses()[j];
            let m_q = m_max * oracle.mass_bits[j] as f64 / (cfg.r_mass as f64).exp2();
            (-(cfg.r as f64)).exp2() + (m_min / m_q).sqrt() * (-(cfg.r_kappa as f64) / 2.0).exp2() + (m / m_q).sqrt() - 1.0
        })
        .fold(0.0, f64::max);
    let row_max = net.row_nonzeros().into_iter().max().unwrap_or(0) as f64;
    Ok(worst * (row_max / oracle.padded_degree as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationCost {
    /// `t sqrt(aleph d)`.
    pub tau: f64,
    pub queries: f64,
    /// Block-encoding error each query may carry.
    pub block_error: f64,
    pub gates: f64,
}

pub fn simulation_cost_model(net: &SpringNetwork, t: f64, eps: f64) -> Result<SimulationCost> {
    if !(t >= 0.0 && t.is_finite()) || !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("need t >= 0 and 0 < eps < 1"));
    }
    let tau = t * (net.aleph() * net.sparsity() as f64).sqrt();
    let queries = tau + (1.0 / eps).log2();
    let spread = net.mass_max() / net.mass_min();
    let log_term = (net.len() as f64 * tau.max(1.0) * spread / eps).log2();
    Ok(SimulationCost { tau, queries, block_error: eps / queries, gates: queries * log_term * log_term })
}

#[derive(Debug, Clone)]
pub struct PreparedState {
    /// Subnormalized state on the velocity block (`N`) and the padded pair block (`N^2`).
    pub amplitudes: DVector<Complex64>,
    pub success_amplitude: f64,
    /// Amplitude amplification rounds needed, `ceil(1 / amplitude)`.
    pub rounds: u64,
}

/// Runs the preparation steps on explicit vectors, given `x0` and `v0`.
pub fn prepare_initial_state(net: &SpringNetwork, x0: &DVector<f64>, v0: &DVector<f64>) -> Result<PreparedState> {
    let n = net.len();
    if x0.len() != n || v0.len() != n {
        return Err(invalid("state length does not match the network"));
    }
    let (alpha, beta) = (v0.norm(), x0.norm());
    let (m_max, k_max, d) = (net.mass_max(), net.kappa_max(), net.sparsity() as f64);
    let norm = (m_max * alpha * alpha + 2.0 * k_max * d * beta * beta).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("initial state is zero".into()));
    }
    // rotation of the selector qubit
    let (vel_weight, pos_weight) = (m_max.sqrt() * alpha / norm, (2.0 * k_max * d).sqrt() * beta / norm);
    let mut amps = DVector::from_element(n + n * n, Complex64::new(0.0, 0.0));
    if alpha > 0.0 {
        for (j, m) in net.masses().iter().enumerate() {
            amps[j] = Complex64::new(vel_weight * (m / m_max).sqrt() * v0[j] / alpha, 0.0);
        }
    }
    if beta > 0.0 {
        let spread = 1.0 / d.sqrt();
        // |+> projection of the swap flag after Z
        let flag = std::f64::consts::FRAC_1_SQRT_2;
        for (j, row) in net.adjacency().into_iter().enumerate() {
            for (k, kap) in row {
                let a = pos_weight * x0[j] / beta * spread * (kap / k_max).sqrt() * flag;
                let (slot, sign) = if k >= j { (j * n + k, 1.0) } else { (k * n + j, -1.0) };
                amps[n + slot] += Complex64::new(0.0, sign * a);
            }
        }
    }
    let success_amplitude = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(success_amplitude > 0.0) {
        return Err(Error::Degenerate("initial state carries no energy".into()));
    }
    Ok(PreparedState { amplitudes: amps, success_amplitude, rounds: (1.0 / success_amplitude).ceil() as u64 })
}

/// Index of pair `(j, k)` in the padded layout against the compact one.
pub fn padded_slot(n: usize, j: usize, k: usize) -> (usize, usize) {
    (j * n + k, pair_index(n, j, k))
}

/// Weyl check: sorted spectra of `normalization * block` and the padded `H`.
pub fn spectrum_deviation(be_h: &BlockEncoding, net: &SpringNetwork) -> f64 {
    let a = SymEigen::new(&(&be_h.block * be_h.normalization)).values;
    let b = SymEigen::new(&padded_h(net)).values;
    (a - b).amax()
}
