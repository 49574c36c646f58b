//! Four ways to move a network forward in time: leapfrog integration of Newton's
//! equations, the closed-form normal-mode solution, exact evolution under the
//! encoding Hamiltonian, and an emulation of phase-estimation based evolution.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_symmetric, SymEigen};
use crate::netcore::{
    build_matrices, decode_primary, encode_generalized, encode_primary, energy, ClassicalState, EncodedState,
    SpringNetwork, SystemMatrices,
};

/// Upper limit on leapfrog steps for one call.
pub const MAX_VERLET_STEPS: u64 = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Velocity Verlet; `None` picks `0.01 / sqrt(aleph d)`.
    Verlet { dt: Option<f64> },
    Exact,
    Hamiltonian,
    QpeEmulated { eps_pe: f64 },
}

/// Largest step the leapfrog integrator accepts.
pub fn verlet_stability_bound(net: &SpringNetwork) -> f64 {
    0.5 / (net.aleph() * net.sparsity() as f64).sqrt()
}

pub fn default_verlet_step(net: &SpringNetwork) -> f64 {
    0.01 / (net.aleph() * net.sparsity() as f64).sqrt()
}

fn accelerations(net: &SpringNetwork, x: &DVector<f64>, out: &mut DVector<f64>) {
    out.fill(0.0);
    for s in net.springs() {
        if s.is_wall() {
            out[s.j] -= s.kappa * x[s.j];
        } else {
            let pull = s.kappa * (x[s.k] - x[s.j]);
            out[s.j] += pull;
            out[s.k] -= pull;
        }
    }
    for (a, m) in out.iter_mut().zip(net.masses()) {
        *a /= m;
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("time {t} must be finite and non-negative")));
    }
    Ok(())
}

/// Leapfrog from `state.t` to `t`; the last step is shortened to land on `t` exactly.
pub fn evolve_newton(net: &SpringNetwork, state: &ClassicalState, t: f64, dt: f64) -> Result<ClassicalState> {
    check_time(t - state.t)?;
    let bound = verlet_stability_bound(net);
    if !(dt > 0.0 && dt <= bound) {
        return Err(invalid(format!("step {dt} outside (0, {bound}]")));
    }
    let span = t - state.t;
    let steps = (span / dt).ceil();
    if steps > MAX_VERLET_STEPS as f64 {
        return Err(Error::ResourceLimit(format!("{steps} leapfrog steps exceed {MAX_VERLET_STEPS}")));
    }
    let mut x = state.x.clone();
    let mut v = state.v.clone();
    let mut acc = DVector::zeros(net.len());
    accelerations(net, &x, &mut acc);
    let mut now = state.t;
    while now < t {
        let h = if t - now < dt { t - now } else { dt };
        v.axpy(0.5 * h, &acc, 1.0);
        x.axpy(h, &v, 1.0);
        accelerations(net, &x, &mut acc);
        v.axpy(0.5 * h, &acc, 1.0);
        now = if t - now <= dt { t } else { now + dt };
    }
    Ok(ClassicalState { x, v, t })
}

/// Normal-mode propagator `y(t) = cos(sqrt(A) t) y0 + [sqrt(A)^+ sin(sqrt(A) t) + t P_ker] ydot0`.
#[derive(Debug, Clone)]
pub struct NormalModes {
    eig: SymEigen,
    freqs: DVector<f64>,
    sqrt_masses: DVector<f64>,
}

impl NormalModes {
    pub fn new(mats: &SystemMatrices) -> Result<Self> {
        let eig = SymEigen::new(&mats.a).clip_psd()?;
        let tol = eig.kernel_threshold();
        let freqs = eig.values.map(|l| if l > tol { l.sqrt() } else { 0.0 });
        Ok(Self { eig, freqs, sqrt_masses: mats.sqrt_masses.clone() })
    }

    /// Mode frequencies, ascending; kernel modes are exactly zero.
    pub fn frequencies(&self) -> &DVector<f64> {
        &self.freqs
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.eig.vectors
    }

    pub fn evolve(&self, state: &ClassicalState, t: f64) -> ClassicalState {
        let tau = t - state.t;
        let q = self.eig.vectors.transpose();
        let c = &q * state.x.component_mul(&self.sqrt_masses);
        let s = &q * state.v.component_mul(&self.sqrt_masses);
        let mut pos = DVector::zeros(c.len());
        let mut vel = DVector::zeros(c.len());
        for i in 0..c.len() {
            let w = self.freqs[i];
            if w == 0.0 {
                pos[i] = c[i] + tau * s[i];
                vel[i] = s[i];
            } else {
                let (sn, cs) = (w * tau).sin_cos();
                pos[i] = cs * c[i] + sn / w * s[i];
                vel[i] = -w * sn * c[i] + cs * s[i];
            }
        }
        let x = (&self.eig.vectors * pos).component_div(&self.sqrt_masses);
        let v = (&self.eig.vectors * vel).component_div(&self.sqrt_masses);
        ClassicalState { x, v, t }
    }

    /// Component of `y = sqrt(M) x` in the kernel of `A` after drifting to time `t`.
    fn kernel_drift(&self, state: &ClassicalState, t: f64) -> DVector<f64> {
        let tau = t - state.t;
        let y = state.x.component_mul(&self.sqrt_masses);
        let ydot = state.v.component_mul(&self.sqrt_masses);
        let mut out = DVector::zeros(y.len());
        for i in (0..self.freqs.len()).filter(|&i| self.freqs[i] == 0.0) {
            let mode = self.eig.vectors.column(i);
            out.axpy(mode.dot(&y) + tau * mode.dot(&ydot), &mode.into_owned(), 1.0);
        }
        out
    }

    /// `(sqrt A)^+ w`.
    fn root_pinv(&self, w: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.eig.vectors.tr_mul(w);
        let scaled = DVector::from_fn(coeffs.len(), |i, _| if self.freqs[i] > 0.0 { coeffs[i] / self.freqs[i] } else { 0.0 });
        &self.eig.vectors * scaled
    }
}

pub fn evolve_exact(net: &SpringNetwork, state: &ClassicalState, t: f64) -> Result<ClassicalState> {
    check_time(t - state.t)?;
    Ok(NormalModes::new(&build_matrices(net))?.evolve(state, t))
}

/// `exp(-i t H)` for a real symmetric `H`, diagonalized once.
///
/// Rows and columns of `H` that are identically zero are left out of the
/// eigensolve; the propagator is the identity there.
#[derive(Debug, Clone)]
pub struct HamiltonianPropagator {
    dim: usize,
    active: Vec<usize>,
    eig: SymEigen,
}

impl HamiltonianPropagator {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(h)?;
        let active: Vec<usize> = (0..h.nrows()).filter(|&i| h.row(i).iter().any(|v| *v != 0.0)).collect();
        let block = DMatrix::from_fn(active.len(), active.len(), |a, b| h[(active[a], active[b])]);
        Ok(Self { dim: h.nrows(), active, eig: SymEigen::new(&block) })
    }

    /// Builds the active block of `-[[0, B], [B^T, 0]]` without the dense `(N + M)^2` matrix.
    pub fn from_matrices(mats: &SystemMatrices) -> Self {
        let n = mats.len();
        let cols = mats.b.columns();
        let active: Vec<usize> = (0..n).chain(cols.iter().map(|c| n + c.index)).collect();
        let size = active.len();
        let mut block = DMatrix::zeros(size, size);
        for (slot, c) in cols.iter().enumerate() {
            let e = n + slot;
            block[(c.j, e)] -= c.coef_j;
            block[(e, c.j)] -= c.coef_j;
            if c.j != c.k {
                block[(c.k, e)] += c.coef_k;
                block[(e, c.k)] += c.coef_k;
            }
        }
        Self { dim: n + mats.b.cols(), active, eig: SymEigen::new(&block) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn evolve(&self, psi: &EncodedState, t: f64) -> Result<EncodedState> {
        if psi.amplitudes.len() != self.dim {
            return Err(invalid(format!("state has length {}, Hamiltonian {}", psi.amplitudes.len(), self.dim)));
        }
        let v = &self.eig.vectors;
        let sub = DVector::from_iterator(self.active.len(), self.active.iter().map(|&i| psi.amplitudes[i]));
        let coeffs = v.map(|a| Complex64::new(a, 0.0)).tr_mul(&sub);
        let phased = DVector::from_fn(coeffs.len(), |i, _| coeffs[i] * Complex64::from_polar(1.0, -t * self.eig.values[i]));
        let back = v.map(|a| Complex64::new(a, 0.0)) * phased;
        let mut out = psi.clone();
        for (slot, &i) in self.active.iter().enumerate() {
            out.amplitudes[i] = back[slot];
        }
        Ok(out)
    }
}

pub fn evolve_hamiltonian(h: &DMatrix<f64>, psi: &EncodedState, t: f64) -> Result<EncodedState> {
    HamiltonianPropagator::new(h)?.evolve(psi, t)
}

/// `|sign(1 + a) sqrt|1 + a| - 1|`.
pub fn signed_sqrt_error(a: f64) -> f64 {
    let s = 1.0 + a;
    (s.signum() * s.abs().sqrt() - 1.0).abs()
}

fn signed_sqrt(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().sqrt()
    }
}

/// Evolution under `-X (x) sqrt(A)` with the eigenphases of `-X (x) A` read off a grid of
/// spacing `2 eps_pe`, as phase estimation would report them.
#[derive(Debug, Clone)]
pub struct QpeEmulator {
    eig: SymEigen,
}

impl QpeEmulator {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(a)?;
        Ok(Self { eig: SymEigen::new(a).clip_psd()? })
    }

    pub fn lambda_min(&self) -> f64 {
        self.eig.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn evolve(&self, psi: &EncodedState, t: f64, eps_pe: f64) -> Result<EncodedState> {
        if !(eps_pe > 0.0 && eps_pe.is_finite()) {
            return Err(invalid(format!("phase-estimation precision {eps_pe} must be positive")));
        }
        let n = self.eig.dim();
        if psi.amplitudes.len() != 2 * n {
            return Err(invalid("state is not a generalized encoding for this A"));
        }
        let rot = self.eig.vectors.map(|a| Complex64::new(a, 0.0));
        let top = rot.tr_mul(&psi.amplitudes.rows(0, n).into_owned());
        let bottom = rot.tr_mul(&psi.amplitudes.rows(n, n).into_owned());
        let grid = 2.0 * eps_pe;
        let phase = |gamma: f64| {
            let x = (gamma / grid).round() * grid;
            Complex64::from_polar(1.0, -t * signed_sqrt(x))
        };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut new_top = DVector::zeros(n);
        let mut new_bottom = DVector::zeros(n);
        for j in 0..n {
            let lam = self.eig.values[j];
            // |-> carries +lambda, |+> carries -lambda
            let minus = (top[j] - bottom[j]) * r * phase(lam);
            let plus = (top[j] + bottom[j]) * r * phase(-lam);
            new_top[j] = (minus + plus) * r;
            new_bottom[j] = (plus - minus) * r;
        }
        let mut out = psi.clone();
        out.amplitudes.rows_mut(0, n).copy_from(&(&rot * new_top));
        out.amplitudes.rows_mut(n, n).copy_from(&(&rot * new_bottom));
        Ok(out)
    }
}

pub fn qpe_emulate_evolution(a: &DMatrix<f64>, psi: &EncodedState, t: f64, eps_pe: f64) -> Result<EncodedState> {
    QpeEmulator::new(a)?.evolve(psi, t, eps_pe)
}

/// Worst-case 2-norm error of [`QpeEmulator::evolve`] against exact evolution.
pub fn qpe_error_bound(t: f64, eps_pe: f64, lambda_min: f64) -> f64 {
    let by_gap = if lambda_min > 0.0 { eps_pe / lambda_min.sqrt() } else { f64::INFINITY };
    t * std::f64::consts::SQRT_2 * by_gap.min(eps_pe.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpeBranch {
    /// `t sqrt(||A^-1||) / eps` is the smaller factor.
    ConditionNumber,
    /// `t^2 / eps^2` is the smaller factor.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QpeCost {
    pub queries: f64,
    pub eps_pe: f64,
    pub delta_pe: f64,
    pub branch: QpeBranch,
    /// Target error at which the two branches cost the same.
    pub crossover_eps: f64,
}

/// Query count and phase-estimation parameters for evolution time `t` to error `eps`.
pub fn qpe_cost_model(a_max: f64, d: usize, t: f64, eps: f64, norm_a_inv: f64) -> Result<QpeCost> {
    if !(a_max > 0.0 && d > 0 && t >= 0.0 && eps > 0.0 && eps < 1.0 && norm_a_inv > 0.0) {
        return Err(invalid("qpe cost model needs a_max > 0, d > 0, t >= 0, 0 < eps < 1, ||A^-1|| > 0"));
    }
    let by_gap = t * norm_a_inv.sqrt() / eps;
    let quadratic = t * t / (eps * eps);
    let (factor, branch) =
        if by_gap <= quadratic { (by_gap, QpeBranch::ConditionNumber) } else { (quadratic, QpeBranch::Quadratic) };
    let lambda_min = 1.0 / norm_a_inv;
    let eps_pe = if t == 0.0 {
        f64::INFINITY
    } else {
        (eps * lambda_min.sqrt() / (2.0 * std::f64::consts::SQRT_2 * t)).max(eps * eps / (8.0 * t * t))
    };
    Ok(QpeCost {
        queries: a_max * d as f64 * (1.0 / eps).log2() * factor,
        eps_pe,
        delta_pe: eps * eps / 64.0,
        branch,
        crossover_eps: t / norm_a_inv.sqrt(),
    })
}

fn check_samples(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("sample times must be finite, non-negative and non-decreasing"));
    }
    Ok(())
}

/// States at each of `times` (ascending) from `state` at `t = 0`.
pub fn simulate(net: &SpringNetwork, state: &ClassicalState, times: &[f64], backend: Backend) -> Result<Vec<ClassicalState>> {
    check_samples(times)?;
    let mats = build_matrices(net);
    match backend {
        Backend::Verlet { dt } => {
            let dt = dt.unwrap_or_else(|| default_verlet_step(net));
            let mut out = Vec::with_capacity(times.len());
            let mut cur = state.clone();
            for &t in times {
                cur = evolve_newton(net, &cur, t, dt)?;
                out.push(cur.clone());
            }
            Ok(out)
        }
        Backend::Exact => {
            let modes = NormalModes::new(&mats)?;
            Ok(times.iter().map(|&t| modes.evolve(state, t)).collect())
        }
        Backend::Hamiltonian => {
            let modes = NormalModes::new(&mats)?;
            let prop = HamiltonianPropagator::from_matrices(&mats);
            let psi0 = encode_primary(net, state)?;
            times
                .iter()
                .map(|&t| {
                    let parts = decode_primary(net, &prop.evolve(&psi0, t)?)?;
                    // B mu = A y on the range of A; the kernel part drifts freely
                    let range = modes.root_pinv(&modes.root_pinv(&mats.b.mul(&parts.mu)));
                    let y = range + modes.kernel_drift(state, t);
                    Ok(ClassicalState {
                        x: y.component_div(&mats.sqrt_masses),
                        v: parts.scaled_velocities.component_div(&mats.sqrt_masses),
                        t,
                    })
                })
                .collect()
        }
        Backend::QpeEmulated { eps_pe } => {
            let modes = NormalModes::new(&mats)?;
            let emu = QpeEmulator::new(&mats.a)?;
            let y0 = state.x.component_mul(&mats.sqrt_masses);
            let ydot0 = state.v.component_mul(&mats.sqrt_masses);
            let psi0 = encode_generalized(&mats.a, &y0, &ydot0)?;
            let n = net.len();
            let scale = (2.0 * psi0.energy).sqrt();
            times
                .iter()
                .map(|&t| {
                    let psi = emu.evolve(&psi0, t, eps_pe)?;
                    let ydot = DVector::from_iterator(n, psi.amplitudes.rows(0, n).iter().map(|a| a.re * scale));
                    let root_a_y = DVector::from_iterator(n, psi.amplitudes.rows(n, n).iter().map(|a| a.im * scale));
                    let y = modes.root_pinv(&root_a_y) + modes.kernel_drift(state, t);
                    Ok(ClassicalState {
                        x: y.component_div(&mats.sqrt_masses),
                        v: ydot.component_div(&mats.sqrt_masses),
                        t,
                    })
                })
                .collect()
        }
    }
}

/// `t,x_1..x_N,v_1..v_N,K,U,E` with 17 significant digits.
pub fn write_timeseries_csv<W: Write>(net: &SpringNetwork, rows: &[ClassicalState], mut out: W) -> std::io::Result<()> {
    let n = net.len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=n).map(|i| format!("v_{i}")));
    header.extend(["K", "U", "E"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let e = energy(net, row);
        let fields: Vec<String> = std::iter::once(row.t)
            .chain(row.x.iter().copied())
            .chain(row.v.iter().copied())
            .chain([e.kinetic, e.potential, e.total])
            .map(|v| format!("{v:.16e}"))
            .collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
