//! Energy-fraction estimation from encoded states by Born-rule sampling.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::NormalModes;
use crate::error::{invalid, Error, Result};
use crate::netcore::{build_matrices, encode_primary, pair_index, ClassicalState, EncodedState, EncodingKind, SpringNetwork};

/// Shot counts above this are refused.
pub const MAX_SHOTS: u64 = 100_000_000;

/// Measurement outcomes that count as a hit (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subset {
    /// Masses; the kinetic energy they carry.
    Vertices(BTreeSet<usize>),
    /// Springs `(j, k)` with `j <= k`; the potential energy they store.
    Edges(BTreeSet<(usize, usize)>),
}

impl Subset {
    pub fn vertices(items: impl IntoIterator<Item = usize>) -> Self {
        Self::Vertices(items.into_iter().collect())
    }

    pub fn edges(items: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self::Edges(items.into_iter().map(|(j, k)| if j <= k { (j, k) } else { (k, j) }).collect())
    }

    /// Amplitude indices selected in `psi`.
    pub fn indices(&self, psi: &EncodedState) -> Result<Vec<usize>> {
        let n = psi.oscillators;
        match self {
            Subset::Vertices(set) => {
                if let Some(j) = set.iter().find(|&&j| j >= n) {
                    return Err(invalid(format!("mass {} out of range", j + 1)));
                }
                Ok(set.iter().copied().collect())
            }
            Subset::Edges(set) => {
                if psi.kind == EncodingKind::Generalized {
                    return Err(invalid("the generalized encoding has no per-spring amplitudes"));
                }
                if let Some((j, k)) = set.iter().find(|(_, k)| *k >= n) {
                    return Err(invalid(format!("spring ({}, {}) out of range", j + 1, k + 1)));
                }
                Ok(set.iter().map(|&(j, k)| n + pair_index(n, j, k)).collect())
            }
        }
    }
}

/// `sum |amp|^2` over the subset.
pub fn exact_fraction(psi: &EncodedState, subset: &Subset) -> Result<f64> {
    Ok(subset.indices(psi)?.into_iter().map(|i| psi.amplitudes[i].norm_sqr()).sum())
}

fn check_accuracy(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("need 0 < epsilon < 1 and 0 < delta < 1, got {eps}, {delta}")));
    }
    Ok(())
}

/// Shots for additive error `eps` with failure probability `delta`.
pub fn hoeffding_shots(eps: f64, delta: f64) -> Result<u64> {
    check_accuracy(eps, delta)?;
    let shots = ((2.0 / delta).ln() / (2.0 * eps * eps)).ceil();
    if shots > MAX_SHOTS as f64 {
        return Err(Error::ResourceLimit(format!("{shots} shots exceed {MAX_SHOTS}")));
    }
    Ok(shots as u64)
}

/// Query count of amplitude estimation for the same accuracy.
pub fn ae_query_model(eps: f64, delta: f64) -> Result<u64> {
    check_accuracy(eps, delta)?;
    Ok(((1.0 / delta).ln() / eps).ceil() as u64)
}

/// Draws outcomes by inverse CDF over `|amp|^2` in index order.
pub struct BornSampler {
    cdf: Vec<f64>,
}

impl BornSampler {
    pub fn new(psi: &EncodedState) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = psi
            .amplitudes
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::Degenerate("state has zero norm".into()));
        }
        Ok(Self { cdf })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cdf.last().expect("nonempty");
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub exact_value: f64,
    pub estimate: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub shots_used: u64,
    pub hits: u64,
    /// Queries amplitude estimation would need for the same accuracy.
    pub ae_query_model: u64,
    pub seed: u64,
}

pub fn sample_estimate(psi: &EncodedState, subset: &Subset, eps: f64, delta: f64, seed: u64) -> Result<EstimateReport> {
    let shots = hoeffding_shots(eps, delta)?;
    let exact_value = exact_fraction(psi, subset)?;
    let targets: BTreeSet<usize> = subset.indices(psi)?.into_iter().collect();
    let sampler = BornSampler::new(psi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..shots).filter(|_| targets.contains(&sampler.sample(&mut rng))).count() as u64;
    Ok(EstimateReport {
        exact_value,
        estimate: hits as f64 / shots as f64,
        epsilon: eps,
        delta,
        shots_used: shots,
        hits,
        ae_query_model: ae_query_model(eps, delta)?,
        seed,
    })
}

/// Exact kinetic fraction of `subset` along the trajectory from `state`.
pub fn kinetic_energy_timeseries(
    net: &SpringNetwork,
    state: &ClassicalState,
    times: &[f64],
    subset: &Subset,
) -> Result<Vec<(f64, f64)>> {
    if !matches!(subset, Subset::Vertices(_)) {
        return Err(invalid("kinetic energy lives on masses"));
    }
    let modes = NormalModes::new(&build_matrices(net))?;
    times
        .iter()
        .map(|&t| {
            let psi = encode_primary(net, &modes.evolve(state, t))?;
            Ok((t, exact_fraction(&psi, subset)?))
        })
        .collect()
}
