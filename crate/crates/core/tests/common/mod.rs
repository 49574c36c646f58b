#![allow(dead_code)]

use harmonet::netcore::{ClassicalState, Spring, SpringNetwork};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network with `n` masses and at most `d` springs touching any mass.
pub fn random_network(rng: &mut impl Rng, n: usize, d: usize) -> SpringNetwork {
    let masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let mut load = vec![0usize; n];
    let mut springs: Vec<Spring> = Vec::new();
    let mut taken = std::collections::BTreeSet::new();
    for _ in 0..n * d {
        let (j, k) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (j, k) = (j.min(k), j.max(k));
        if taken.contains(&(j, k)) || load[j] >= d || load[k] >= d {
            continue;
        }
        taken.insert((j, k));
        load[j] += 1;
        if j != k {
            load[k] += 1;
        }
        springs.push(Spring { j, k, kappa: rng.gen_range(0.1..2.0) });
    }
    if springs.is_empty() {
        springs.push(Spring { j: 0, k: 0, kappa: 1.0 });
    }
    SpringNetwork::new(masses, springs, d).expect("generator respects the sparsity")
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> ClassicalState {
    ClassicalState::new(
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
    )
}

/// The suite shared by the encoding and conservation checks.
pub fn network_suite(count: usize, seed: u64) -> Vec<(SpringNetwork, ClassicalState)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=64);
            let d = rng.gen_range(1..=8);
            let net = random_network(&mut rng, n, d);
            let state = random_state(&mut rng, n);
            (net, state)
        })
        .collect()
}
