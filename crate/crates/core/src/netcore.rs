//! Spring networks, their system matrices and the state encodings.
//!
//! Indices are 0-based in memory and 1-based in the JSON file format.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_symmetric, SymEigen};

/// Largest `N + M` for which a dense Hamiltonian is materialized.
pub const DENSE_HAMILTONIAN_CAP: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    pub j: usize,
    pub k: usize,
    pub kappa: f64,
}

impl Spring {
    pub fn is_wall(&self) -> bool {
        self.j == self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringNetwork {
    masses: Vec<f64>,
    springs: Vec<Spring>,
    sparsity: usize,
}

/// On-disk form: `{"n", "masses", "springs": [[j, k, kappa]], "d"}` with 1-based indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub masses: Vec<f64>,
    pub springs: Vec<(usize, usize, f64)>,
    pub d: usize,
}

impl SpringNetwork {
    /// Validates and normalizes: springs are stored with `j <= k`, sorted.
    pub fn new(masses: Vec<f64>, springs: Vec<Spring>, sparsity: usize) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(invalid("network has no masses"));
        }
        if let Some((i, m)) = masses.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(invalid(format!("mass {} is {m}, expected positive", i + 1)));
        }
        let mut table = BTreeMap::new();
        for s in springs {
            let (j, k) = if s.j <= s.k { (s.j, s.k) } else { (s.k, s.j) };
            if k >= n {
                return Err(invalid(format!("spring ({}, {}) references a mass beyond N = {n}", s.j + 1, s.k + 1)));
            }
            if !(s.kappa.is_finite() && s.kappa >= 0.0) {
                return Err(invalid(format!("spring ({}, {}) has constant {}", j + 1, k + 1, s.kappa)));
            }
            if table.insert((j, k), s.kappa).is_some() {
                return Err(invalid(format!("spring ({}, {}) listed twice", j + 1, k + 1)));
            }
        }
        let springs: Vec<Spring> = table.into_iter().map(|((j, k), kappa)| Spring { j, k, kappa }).collect();
        let net = Self { masses, springs, sparsity };
        if sparsity == 0 {
            return Err(invalid("sparsity d must be at least 1"));
        }
        let worst = net.row_nonzeros().into_iter().max().unwrap_or(0);
        if worst > sparsity {
            return Err(invalid(format!("a row of K has {worst} nonzeros, more than d = {sparsity}")));
        }
        Ok(net)
    }

    /// Same as [`SpringNetwork::new`] with `d` set to the densest row of K.
    pub fn with_minimal_sparsity(masses: Vec<f64>, springs: Vec<Spring>) -> Result<Self> {
        let probe = Self::new(masses, springs, usize::MAX)?;
        let d = probe.row_nonzeros().into_iter().max().unwrap_or(0).max(1);
        Ok(Self { sparsity: d, ..probe })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn springs(&self) -> &[Spring] {
        &self.springs
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Number of pair slots `M = N(N+1)/2`.
    pub fn pair_count(&self) -> usize {
        pair_count(self.len())
    }

    pub fn mass_max(&self) -> f64 {
        self.masses.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn mass_min(&self) -> f64 {
        self.masses.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn kappa_max(&self) -> f64 {
        self.springs.iter().map(|s| s.kappa).fold(0.0, f64::max)
    }

    /// Stiffness-to-mass ratio `kappa_max / m_min`.
    pub fn aleph(&self) -> f64 {
        self.kappa_max() / self.mass_min()
    }

    /// Nonzero count of each row of the symmetric spring matrix, diagonal included.
    pub fn row_nonzeros(&self) -> Vec<usize> {
        let mut counts = vec![0; self.len()];
        for s in self.springs.iter().filter(|s| s.kappa != 0.0) {
            counts[s.j] += 1;
            if !s.is_wall() {
                counts[s.k] += 1;
            }
        }
        counts
    }

    /// Neighbors of each mass (itself included when wall-tied), sorted, with constants.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.len()];
        for s in self.springs.iter().filter(|s| s.kappa != 0.0) {
            adj[s.j].push((s.k, s.kappa));
            if !s.is_wall() {
                adj[s.k].push((s.j, s.kappa));
            }
        }
        for row in &mut adj {
            row.sort_by_key(|&(k, _)| k);
        }
        adj
    }

    pub fn kappa(&self, j: usize, k: usize) -> f64 {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        self.springs
            .binary_search_by(|s| (s.j, s.k).cmp(&(j, k)))
            .map(|i| self.springs[i].kappa)
            .unwrap_or(0.0)
    }

    pub fn from_file(file: NetworkFile) -> Result<Self> {
        if file.masses.len() != file.n {
            return Err(invalid(format!("n = {} but {} masses given", file.n, file.masses.len())));
        }
        let mut springs = Vec::with_capacity(file.springs.len());
        for (j, k, kappa) in file.springs {
            if j == 0 || k == 0 {
                return Err(invalid("spring indices are 1-based"));
            }
            springs.push(Spring { j: j - 1, k: k - 1, kappa });
        }
        Self::new(file.masses, springs, file.d)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            n: self.len(),
            masses: self.masses.clone(),
            springs: self.springs.iter().map(|s| (s.j + 1, s.k + 1, s.kappa)).collect(),
            d: self.sparsity,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| invalid(format!("network JSON: {e}")))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network serializes")
    }
}

pub fn pair_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Column of pair `(j, k)`, `j <= k`, in lexicographic order.
pub fn pair_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < n);
    j * n - j * j.saturating_sub(1) / 2 + (k - j)
}

/// Inverse of [`pair_index`].
pub fn pair_of_index(n: usize, index: usize) -> (usize, usize) {
    let mut start = 0;
    for j in 0..n {
        let len = n - j;
        if index < start + len {
            return (j, j + index - start);
        }
        start += len;
    }
    panic!("pair index {index} out of range for N = {n}");
}

/// Sparse `N x M` factor `B` with `B B^T = A`; only nonzero columns are stored.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    rows: usize,
    columns: Vec<IncidenceColumn>,
}

/// Column `index` equals `coef_j e_j - coef_k e_k` (just `coef_j e_j` for a wall spring).
#[derive(Debug, Clone, Copy)]
pub struct IncidenceColumn {
    pub index: usize,
    pub j: usize,
    pub k: usize,
    pub coef_j: f64,
    pub coef_k: f64,
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        pair_count(self.rows)
    }

    pub fn columns(&self) -> &[IncidenceColumn] {
        &self.columns
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.rows, self.cols());
        for c in &self.columns {
            b[(c.j, c.index)] += c.coef_j;
            if c.j != c.k {
                b[(c.k, c.index)] -= c.coef_k;
            }
        }
        b
    }

    /// `B^T y`, length `M`.
    pub fn transpose_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.cols());
        for c in &self.columns {
            out[c.index] = if c.j == c.k { c.coef_j * y[c.j] } else { c.coef_j * y[c.j] - c.coef_k * y[c.k] };
        }
        out
    }

    /// `B z` for a length-`M` vector.
    pub fn mul(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows);
        for c in &self.columns {
            out[c.j] += c.coef_j * z[c.index];
            if c.j != c.k {
                out[c.k] -= c.coef_k * z[c.index];
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub sqrt_masses: DVector<f64>,
    /// Force matrix `F`.
    pub force: DMatrix<f64>,
    /// Mass-weighted `A = M^{-1/2} F M^{-1/2}`.
    pub a: DMatrix<f64>,
    pub b: IncidenceMatrix,
}

impl SystemMatrices {
    pub fn len(&self) -> usize {
        self.sqrt_masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_masses.is_empty()
    }
}

pub fn build_matrices(net: &SpringNetwork) -> SystemMatrices {
    let n = net.len();
    let sqrt_masses = DVector::from_iterator(n, net.masses().iter().map(|m| m.sqrt()));
    let mut force = DMatrix::zeros(n, n);
    let mut columns = Vec::new();
    for s in net.springs() {
        force[(s.j, s.j)] += s.kappa;
        if !s.is_wall() {
            force[(s.k, s.k)] += s.kappa;
            force[(s.j, s.k)] -= s.kappa;
            force[(s.k, s.j)] -= s.kappa;
        }
        if s.kappa != 0.0 {
            let root = s.kappa.sqrt();
            columns.push(IncidenceColumn {
                index: pair_index(n, s.j, s.k),
                j: s.j,
                k: s.k,
                coef_j: root / sqrt_masses[s.j],
                coef_k: if s.is_wall() { 0.0 } else { root / sqrt_masses[s.k] },
            });
        }
    }
    let a = DMatrix::from_fn(n, n, |i, j| force[(i, j)] / (sqrt_masses[i] * sqrt_masses[j]));
    SystemMatrices { sqrt_masses, force, a, b: IncidenceMatrix { rows: n, columns } }
}

/// `H = -[[0, B], [B^T, 0]]`, dense, of size `N + M`.
pub fn hamiltonian(mats: &SystemMatrices) -> Result<DMatrix<f64>> {
    let n = mats.len();
    let dim = n + mats.b.cols();
    if dim > DENSE_HAMILTONIAN_CAP {
        return Err(Error::ResourceLimit(format!("dense Hamiltonian of dimension {dim} exceeds {DENSE_HAMILTONIAN_CAP}")));
    }
    let mut h = DMatrix::zeros(dim, dim);
    for c in mats.b.columns() {
        let col = n + c.index;
        h[(c.j, col)] -= c.coef_j;
        h[(col, c.j)] -= c.coef_j;
        if c.j != c.k {
            h[(c.k, col)] += c.coef_k;
            h[(col, c.k)] += c.coef_k;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(x: DVector<f64>, v: DVector<f64>) -> Self {
        Self { x, v, t: 0.0 }
    }

    /// Displacement `e_j`, at rest.
    pub fn displaced(n: usize, j: usize) -> Self {
        Self::new(DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 }), DVector::zeros(n))
    }

    /// Unit velocity on mass `j`, all masses at equilibrium.
    pub fn kicked(n: usize, j: usize) -> Self {
        Self::new(DVector::zeros(n), DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 }))
    }

    fn check(&self, net: &SpringNetwork) -> Result<()> {
        let n = net.len();
        if self.x.len() != n || self.v.len() != n {
            return Err(invalid(format!("state has length {}/{}, network has {n} masses", self.x.len(), self.v.len())));
        }
        if self.x.iter().chain(self.v.iter()).any(|a| !a.is_finite()) {
            return Err(invalid("state has non-finite entries"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energies {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// Kinetic and potential energy straight from the spring list.
pub fn energy(net: &SpringNetwork, state: &ClassicalState) -> Energies {
    let kinetic = 0.5 * net.masses().iter().zip(state.v.iter()).map(|(m, v)| m * v * v).sum::<f64>();
    let potential = 0.5
        * net
            .springs()
            .iter()
            .map(|s| {
                let stretch = if s.is_wall() { state.x[s.j] } else { state.x[s.j] - state.x[s.k] };
                s.kappa * stretch * stretch
            })
            .sum::<f64>();
    Energies { kinetic, potential, total: kinetic + potential }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// `(sqrt(M) xdot ; i mu) / sqrt(2E)`, length `N + M`.
    Primary,
    /// `(ydot ; i sqrt(A) y) / sqrt(2E)`, length `2N`.
    Generalized,
    /// `(P y ; -i B^+ P ydot) / sqrt(2F)`, length `N + M`.
    Alternative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState {
    pub amplitudes: DVector<Complex64>,
    /// `E` (or the conserved `F` for the alternative encoding).
    pub energy: f64,
    pub kind: EncodingKind,
    /// Size of the leading velocity block.
    pub oscillators: usize,
}

impl EncodedState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn normalized(energy: f64) -> Result<f64> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::Degenerate(format!("energy is {energy}, nothing to encode")));
    }
    Ok((2.0 * energy).sqrt())
}

/// Primary encoding, assembled from the spring list.
pub fn encode_primary(net: &SpringNetwork, state: &ClassicalState) -> Result<EncodedState> {
    state.check(net)?;
    let n = net.len();
    let scale = normalized(energy(net, state).total)?;
    let mut amps = DVector::from_element(n + net.pair_count(), Complex64::new(0.0, 0.0));
    for (j, (m, v)) in net.masses().iter().zip(state.v.iter()).enumerate() {
        amps[j] = Complex64::new(m.sqrt() * v / scale, 0.0);
    }
    for s in net.springs() {
        let stretch = if s.is_wall() { state.x[s.j] } else { state.x[s.j] - state.x[s.k] };
        amps[n + pair_index(n, s.j, s.k)] = Complex64::new(0.0, s.kappa.sqrt() * stretch / scale);
    }
    Ok(EncodedState { amplitudes: amps, energy: 0.5 * scale * scale, kind: EncodingKind::Primary, oscillators: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryParts {
    /// `sqrt(M) xdot`.
    pub scaled_velocities: DVector<f64>,
    /// Spring stretches weighted by `sqrt(kappa)`, one per pair slot.
    pub mu: DVector<f64>,
}

pub fn decode_primary(net: &SpringNetwork, psi: &EncodedState) -> Result<PrimaryParts> {
    let n = net.len();
    if psi.kind != EncodingKind::Primary || psi.amplitudes.len() != n + net.pair_count() {
        return Err(invalid("state is not a primary encoding of this network"));
    }
    let scale = (2.0 * psi.energy).sqrt();
    Ok(PrimaryParts {
        scaled_velocities: DVector::from_iterator(n, psi.amplitudes.rows(0, n).iter().map(|a| a.re * scale)),
        mu: DVector::from_iterator(net.pair_count(), psi.amplitudes.rows(n, net.pair_count()).iter().map(|a| a.im * scale)),
    })
}

/// Encoding of `ydot = -A y` for any PSD `A`.
pub fn encode_generalized(a: &DMatrix<f64>, y: &DVector<f64>, ydot: &DVector<f64>) -> Result<EncodedState> {
    check_symmetric(a)?;
    let n = a.nrows();
    if y.len() != n || ydot.len() != n {
        return Err(invalid("state length does not match A"));
    }
    let eig = SymEigen::new(a).clip_psd()?;
    let root_a = eig.apply_fn(f64::sqrt);
    let pos = &root_a * y;
    let scale = normalized(0.5 * (ydot.norm_squared() + pos.norm_squared()))?;
    let amps = DVector::from_iterator(
        2 * n,
        ydot.iter().map(|v| Complex64::new(v / scale, 0.0)).chain(pos.iter().map(|p| Complex64::new(0.0, p / scale))),
    );
    Ok(EncodedState { amplitudes: amps, energy: 0.5 * scale * scale, kind: EncodingKind::Generalized, oscillators: n })
}

/// Conserved quantity `F = y^T P y / 2 + ydot^T A^+ ydot / 2` of the alternative encoding.
pub fn alternative_energy(mats: &SystemMatrices, y: &DVector<f64>, ydot: &DVector<f64>) -> f64 {
    let (proj, pinv) = range_projector_and_pinv(&mats.a);
    0.5 * (y.dot(&(&proj * y)) + ydot.dot(&(&pinv * ydot)))
}

fn range_projector_and_pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymEigen::new(a);
    let tol = eig.kernel_threshold();
    let proj = eig.apply_fn(|l| if l > tol { 1.0 } else { 0.0 });
    let pinv = eig.apply_fn(|l| if l > tol { 1.0 / l } else { 0.0 });
    (proj, pinv)
}

/// Alternative encoding; `y = sqrt(M) x` and `ydot = sqrt(M) xdot`.
pub fn encode_alternative(mats: &SystemMatrices, y: &DVector<f64>, ydot: &DVector<f64>) -> Result<EncodedState> {
    let n = mats.len();
    if y.len() != n || ydot.len() != n {
        return Err(invalid("state length does not match the network"));
    }
    let (proj, pinv) = range_projector_and_pinv(&mats.a);
    let py = &proj * y;
    // B^+ = B^T A^+, and A^+ P = A^+
    let lower = mats.b.transpose_mul(&(&pinv * ydot));
    let f = 0.5 * (py.norm_squared() + lower.norm_squared());
    let scale = normalized(f)?;
    let amps = DVector::from_iterator(
        n + mats.b.cols(),
        py.iter().map(|p| Complex64::new(p / scale, 0.0)).chain(lower.iter().map(|l| Complex64::new(0.0, -l / scale))),
    );
    Ok(EncodedState { amplitudes: amps, energy: f, kind: EncodingKind::Alternative, oscillators: n })
}
