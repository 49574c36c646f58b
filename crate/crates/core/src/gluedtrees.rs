//! Two binary trees of depth `n` glued leaf to leaf by a random alternating cycle,
//! as an oscillator network with walls at the two roots, and its exact reduction
//! to a `2n`-site chain of column amplitudes.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blockenc::simulation_cost_model;
use crate::dynamics::{HamiltonianPropagator, NormalModes};
use crate::error::{invalid, Error, Result};
use crate::estimate::BornSampler;
use crate::linalg::SymEigen;
use crate::netcore::{build_matrices, encode_primary, ClassicalState, Spring, SpringNetwork};

/// Deepest trees [`generate`] builds.
pub const MAX_DEPTH: usize = 20;
/// Grid step for exit-time scans, `pi / (20 sqrt 6)`.
pub const EXIT_SCAN_STEP: f64 = std::f64::consts::PI / (20.0 * 2.449_489_742_783_178);

#[derive(Debug, Clone)]
pub struct GluedTrees {
    pub depth: usize,
    pub network: SpringNetwork,
    /// Random `2n`-bit name of each vertex.
    pub labels: Vec<u64>,
}

impl GluedTrees {
    pub fn entrance(&self) -> usize {
        0
    }

    pub fn exit(&self) -> usize {
        self.network.len() - 1
    }

    /// Column (1-based) of every vertex.
    pub fn columns(&self) -> Vec<usize> {
        column_sizes(self.depth).iter().enumerate().flat_map(|(l, &size)| std::iter::repeat_n(l + 1, size)).collect()
    }
}

/// `N_l = 2^(l-1)` on the left, `2^(2n-l)` on the right.
pub fn column_sizes(n: usize) -> Vec<usize> {
    (1..=2 * n).map(|l| if l <= n { 1 << (l - 1) } else { 1 << (2 * n - l) }).collect()
}

fn check_depth(n: usize, cap: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("depth {n} must be at least 2")));
    }
    if n > cap {
        return Err(Error::ResourceLimit(format!("depth {n} exceeds {cap}")));
    }
    Ok(())
}

pub fn generate(n: usize, seed: u64) -> Result<GluedTrees> {
    check_depth(n, MAX_DEPTH)?;
    let sizes = column_sizes(n);
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, s| Some(std::mem::replace(acc, *acc + s))).collect();
    let total = offsets[2 * n - 1] + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |j: usize, k: usize| Spring { j, k, kappa: 1.0 };
    let mut springs = vec![unit(0, 0), unit(total - 1, total - 1)];
    for l in 0..n - 1 {
        for i in 0..sizes[l] {
            springs.push(unit(offsets[l] + i, offsets[l + 1] + 2 * i));
            springs.push(unit(offsets[l] + i, offsets[l + 1] + 2 * i + 1));
        }
    }
    for l in n..2 * n - 1 {
        for i in 0..sizes[l] {
            springs.push(unit(offsets[l] + i, offsets[l + 1] + i / 2));
        }
    }
    let leaves = sizes[n - 1];
    let mut left: Vec<usize> = (0..leaves).map(|i| offsets[n - 1] + i).collect();
    let mut right: Vec<usize> = (0..leaves).map(|i| offsets[n] + i).collect();
    left.shuffle(&mut rng);
    right.shuffle(&mut rng);
    for i in 0..leaves {
        springs.push(unit(left[i], right[i]));
        springs.push(unit(right[i], left[(i + 1) % leaves]));
    }
    let network = SpringNetwork::new(vec![1.0; total], springs, 3)?;
    let bits = 2 * n as u32;
    let mut seen = HashSet::with_capacity(total);
    let labels = (0..total)
        .map(|_| loop {
            let label = rng.gen::<u64>() & ((1u64 << bits) - 1);
            if seen.insert(label) {
                break label;
            }
        })
        .collect();
    Ok(GluedTrees { depth: n, network, labels })
}

/// Column amplitudes `z_l = sum_{j in column l} x_j / sqrt(N_l)`.
pub fn project_to_columns(n: usize, x: &DVector<f64>) -> DVector<f64> {
    let sizes = column_sizes(n);
    let mut out = DVector::zeros(2 * n);
    let mut start = 0;
    for (l, &size) in sizes.iter().enumerate() {
        out[l] = x.rows(start, size).sum() / (size as f64).sqrt();
        start += size;
    }
    out
}

/// The `2n x 2n` column chain with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct ReducedChain {
    pub depth: usize,
    pub matrix: DMatrix<f64>,
    eig: SymEigen,
    /// `sqrt` of the chain eigenvalues, ascending.
    freqs: Vec<f64>,
    /// `<2n|lambda_l><lambda_l|1>`.
    exit_weights: Vec<f64>,
}

pub fn reduce_to_chain(n: usize) -> Result<ReducedChain> {
    check_depth(n, 512)?;
    let size = 2 * n;
    let mut matrix = DMatrix::from_diagonal_element(size, size, 3.0);
    for l in 0..size - 1 {
        let hop = if l == n - 1 { 2.0 } else { std::f64::consts::SQRT_2 };
        matrix[(l, l + 1)] = -hop;
        matrix[(l + 1, l)] = -hop;
    }
    let eig = SymEigen::new(&matrix);
    let freqs = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let exit_weights = (0..size).map(|l| eig.vectors[(size - 1, l)] * eig.vectors[(0, l)]).collect();
    Ok(ReducedChain { depth: n, matrix, eig, freqs, exit_weights })
}

/// `(1/T) int_0^T cos(a t) cos(b t) dt`.
fn mean_cos_product(a: f64, b: f64, t: f64) -> f64 {
    let sinc = |c: f64| if c * t == 0.0 { 1.0 } else { (c * t).sin() / (c * t) };
    0.5 * (sinc(a - b) + sinc(a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub depth: usize,
    pub lambda_min: f64,
    /// Smallest gap between consecutive eigenvalues of the chain matrix.
    pub matrix_gap: f64,
    /// Smallest gap between consecutive frequencies.
    pub frequency_gap: f64,
    /// `frequency_gap >= matrix_gap / sqrt 6`.
    pub sqrt6_gap_relation: bool,
    /// `frequency_gap >= matrix_gap / (2 sqrt(lambda_max))`, which always holds.
    pub midpoint_gap_relation: bool,
    /// `|| A v1 ||` for the unnormalized trial vector.
    pub v1_residual: f64,
    pub v1_residual_normalized: f64,
    /// `|<1|lambda_1>|` for the lowest mode.
    pub lambda1_overlap: f64,
    pub p_exit_limit: f64,
    pub p_exit_floor: f64,
}

impl ReducedChain {
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eig.values
    }

    /// Orthonormal eigenvectors as columns, matching [`ReducedChain::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eig.vectors
    }

    /// Column velocities `zdot(t)` after a unit kick at the entrance.
    pub fn velocities(&self, t: f64) -> DVector<f64> {
        let v = &self.eig.vectors;
        let coeffs = DVector::from_fn(self.freqs.len(), |l, _| v[(0, l)] * (self.freqs[l] * t).cos());
        v * coeffs
    }

    /// Velocity of the exit root after a unit kick at the entrance.
    pub fn exit_velocity(&self, t: f64) -> f64 {
        self.freqs.iter().zip(&self.exit_weights).map(|(g, w)| w * (g * t).cos()).sum()
    }

    /// Share of the energy moving with the exit root, `|zdot_2n(t)|^2`.
    pub fn exit_kinetic(&self, t: f64) -> f64 {
        self.exit_velocity(t).powi(2)
    }

    /// Time average of [`ReducedChain::exit_kinetic`] over `[0, t]`, in closed form.
    pub fn p_exit(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("averaging window {t} must be finite and non-negative")));
        }
        if t == 0.0 {
            return Ok(self.exit_kinetic(0.0));
        }
        let mut total = 0.0;
        for (a, wa) in self.freqs.iter().zip(&self.exit_weights) {
            for (b, wb) in self.freqs.iter().zip(&self.exit_weights) {
                total += wa * wb * mean_cos_product(*a, *b, t);
            }
        }
        Ok(total)
    }

    /// `T -> infinity` limit for a non-degenerate spectrum.
    pub fn p_exit_limit(&self) -> f64 {
        0.5 * self.exit_weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// The same limit written through entrance overlaps, `sum |<lambda|1>|^4 / 2`.
    pub fn p_exit_limit_from_overlaps(&self) -> f64 {
        0.5 * (0..self.eig.dim()).map(|l| self.eig.vectors[(0, l)].powi(4)).sum::<f64>()
    }

    /// Trial vector for the lowest mode.
    pub fn trial_vector(&self) -> DVector<f64> {
        let n = self.depth as i32;
        DVector::from_fn(2 * self.depth, |i, _| {
            let l = i as i32 + 1;
            if l <= n {
                (-(2 + n - l) as f64 / 2.0).exp2()
            } else {
                (-(1 + l - n) as f64 / 2.0).exp2()
            }
        })
    }

    pub fn spectral_report(&self) -> SpectralReport {
        let vals = &self.eig.values;
        let matrix_gap = vals.as_slice().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let frequency_gap = self.freqs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let v1 = self.trial_vector();
        let residual = (&self.matrix * &v1).norm();
        SpectralReport {
            depth: self.depth,
            lambda_min: vals[0],
            matrix_gap,
            frequency_gap,
            sqrt6_gap_relation: frequency_gap >= matrix_gap / 6f64.sqrt(),
            midpoint_gap_relation: frequency_gap >= matrix_gap / (2.0 * vals[vals.len() - 1].sqrt()),
            v1_residual: residual,
            v1_residual_normalized: residual / v1.norm(),
            lambda1_overlap: self.eig.vectors[(0, 0)].abs(),
            p_exit_limit: self.p_exit_limit(),
            p_exit_floor: 1.0 / (4.0 * self.depth as f64),
        }
    }
}

/// First grid time at which the exit carries at least `threshold` of the energy.
pub fn find_exit_time(chain: &ReducedChain, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid(format!("threshold {threshold} outside (0, 1]")));
    }
    let horizon = 10.0 * (chain.depth as f64).powi(4);
    let steps = (horizon / EXIT_SCAN_STEP).ceil() as u64;
    (0..=steps)
        .map(|i| i as f64 * EXIT_SCAN_STEP)
        .find(|&t| chain.exit_kinetic(t) >= threshold)
        .ok_or_else(|| Error::NotFound(format!("exit never reaches {threshold} before t = {horizon}")))
}

/// `|xdot_exit(t)|^2` on the full network, kicked at the entrance, at each time.
pub fn full_exit_series(inst: &GluedTrees, times: &[f64]) -> Result<Vec<f64>> {
    let n = inst.network.len();
    let modes = NormalModes::new(&build_matrices(&inst.network))?;
    let start = ClassicalState::kicked(n, inst.entrance());
    Ok(times.iter().map(|&t| modes.evolve(&start, t).v[inst.exit()].powi(2)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub found: bool,
    pub exit_label: Option<u64>,
    pub evolution_time: f64,
    /// Born probability of reading the exit per run.
    pub exit_probability: f64,
    pub shots: u64,
    /// Block-encoding queries spent on the simulations.
    pub simulation_queries: f64,
    /// Wall-spring lookups to check candidates.
    pub verification_queries: u64,
    pub total_queries: f64,
}

/// Evolution time for the search, where the exit first holds `1/(8n)` of the energy.
pub fn search_time(n: usize) -> Result<f64> {
    find_exit_time(&reduce_to_chain(n)?, 1.0 / (8.0 * n as f64))
}

/// Evolves the encoded kick, samples vertices, and checks each candidate for a wall spring.
pub fn solve_instance(inst: &GluedTrees, seed: u64) -> Result<SolveReport> {
    let n = inst.depth;
    let net = &inst.network;
    let t = search_time(n)?;
    let mats = build_matrices(net);
    let psi0 = encode_primary(net, &ClassicalState::kicked(net.len(), inst.entrance()))?;
    let psi = HamiltonianPropagator::from_matrices(&mats).evolve(&psi0, t)?;
    let exit_probability = psi.amplitudes[inst.exit()].norm_sqr();
    let per_run = simulation_cost_model(net, t, 0.1)?.queries;
    // 1/(8n) per run leaves failure below 1e-6 after this many shots
    let budget = (8.0 * n as f64 * 1e6f64.ln()).ceil() as u64;
    let sampler = BornSampler::new(&psi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verification_queries = 0;
    let mut shots = 0;
    let mut exit_label = None;
    while shots < budget && exit_label.is_none() {
        shots += 1;
        let outcome = sampler.sample(&mut rng);
        if outcome < net.len() {
            verification_queries += 1;
            if outcome != inst.entrance() && net.kappa(outcome, outcome) > 0.0 {
                exit_label = Some(inst.labels[outcome]);
            }
        }
    }
    let simulation_queries = shots as f64 * per_run;
    Ok(SolveReport {
        found: exit_label.is_some(),
        exit_label,
        evolution_time: t,
        exit_probability,
        shots,
        simulation_queries,
        verification_queries,
        total_queries: simulation_queries + verification_queries as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkReport {
    pub found: bool,
    /// Neighbor queries spent.
    pub queries: u64,
}

/// Classical baseline: a random walk from the entrance that queries one neighbor list per step.
pub fn classical_random_walk(inst: &GluedTrees, seed: u64, max_queries: u64) -> WalkReport {
    let adjacency = inst.network.adjacency();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at = inst.entrance();
    for queries in 1..=max_queries {
        let next: Vec<usize> = adjacency[at].iter().map(|(k, _)| *k).filter(|&k| k != at).collect();
        at = next[rng.gen_range(0..next.len())];
        if at == inst.exit() {
            return WalkReport { found: true, queries };
        }
    }
    WalkReport { found: false, queries: max_queries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_two_instance() {
        let g = generate(2, 1).unwrap();
        assert_eq!(g.network.len(), 6);
        // 2 + 2 tree edges, 4 gluing edges, 2 walls
        assert_eq!(g.network.springs().len(), 10);
        let mats = build_matrices(&g.network);
        assert!((0..6).all(|j| mats.a[(j, j)] == 3.0));
        assert_eq!(g.network.row_nonzeros(), vec![3; 6]);
    }

    #[test]
    fn labels_are_distinct_and_seeded() {
        let a = generate(4, 7).unwrap();
        let b = generate(4, 8).unwrap();
        let set: HashSet<u64> = a.labels.iter().copied().collect();
        assert_eq!(set.len(), a.labels.len());
        assert!(a.labels.iter().all(|l| *l < 1 << 8));
        assert_ne!(a.labels, b.labels);
        assert_eq!(a.labels, generate(4, 7).unwrap().labels);
    }

    #[test]
    fn chain_entries() {
        let c = reduce_to_chain(3).unwrap();
        assert_eq!(c.matrix[(0, 0)], 3.0);
        assert_eq!(c.matrix[(2, 3)], -2.0);
        assert_eq!(c.matrix[(0, 1)], -std::f64::consts::SQRT_2);
    }

    #[test]
    fn trial_vector_norm() {
        let c = reduce_to_chain(5).unwrap();
        assert!((c.trial_vector().norm_squared() - (1.0 - 1.0 / 32.0)).abs() < 1e-15);
    }

    #[test]
    fn depth_checks() {
        assert!(matches!(generate(1, 0), Err(Error::InvalidInput(_))));
        assert!(matches!(generate(21, 0), Err(Error::ResourceLimit(_))));
        assert!(find_exit_time(&reduce_to_chain(2).unwrap(), 0.0).is_err());
    }
}
