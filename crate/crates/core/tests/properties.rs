mod common;

use harmonet::blockenc::{
    block_encode_b, block_encode_b_circuit, block_encode_h, block_error, padded_b, padded_h, padded_slot,
    predicted_error, prepare_initial_state, quantize, QuantizationConfig,
};
use harmonet::bqpred::{self, Circuit, Gate};
use harmonet::dynamics::{
    evolve_exact, evolve_newton, qpe_error_bound, verlet_stability_bound, HamiltonianPropagator, NormalModes,
    QpeEmulator,
};
use harmonet::estimate::{exact_fraction, sample_estimate, Subset};
use harmonet::gluedtrees::{generate, project_to_columns, reduce_to_chain};
use harmonet::linalg::spectral_norm;
use harmonet::netcore::{
    alternative_energy, build_matrices, encode_alternative, encode_generalized, encode_primary, energy, pair_index,
    pair_of_index, ClassicalState, SpringNetwork,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn network(seed: u64, n: usize, d: usize) -> (SpringNetwork, ClassicalState) {
    let mut rng = common::rng(seed);
    let net = common::random_network(&mut rng, n, d);
    let state = common::random_state(&mut rng, n);
    (net, state)
}

fn arb_network(max_n: usize, max_d: usize) -> impl Strategy<Value = (SpringNetwork, ClassicalState)> {
    (any::<u64>(), 1..=max_n, 1..=max_d).prop_map(|(seed, n, d)| network(seed, n, d))
}

/// `n` a power of two, for the block encodings.
fn arb_small_network() -> impl Strategy<Value = SpringNetwork> {
    (any::<u64>(), prop_oneof![Just(2usize), Just(4)], 1..=3usize).prop_map(|(seed, n, d)| network(seed, n, d).0)
}

fn arb_circuit() -> impl Strategy<Value = Circuit> {
    (1..=3usize, proptest::collection::vec((0..3u8, 0..3usize, 0..3usize, 0..3usize), 1..=6)).prop_map(|(q, raw)| {
        let mut gates: Vec<Gate> = Vec::new();
        for (kind, a, b, c) in raw {
            let after_h = gates.last() == Some(&Gate::Hadamard);
            let gate = match kind {
                0 if !after_h => Gate::Hadamard,
                1 if q == 3 && a != b && a != c && b != c => Gate::Toffoli(a, b, c),
                _ => Gate::Not(a % q),
            };
            gates.push(gate);
        }
        Circuit::new(q, gates).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn force_is_sum_of_edge_outer_products((net, _) in arb_network(24, 6)) {
        let mats = build_matrices(&net);
        let b = mats.b.to_dense();
        let root_m = DMatrix::from_diagonal(&mats.sqrt_masses);
        let mut rebuilt = DMatrix::zeros(net.len(), net.len());
        for col in 0..b.ncols() {
            let u = &root_m * b.column(col);
            rebuilt += &u * u.transpose();
        }
        prop_assert!((rebuilt - &mats.force).amax() <= 1e-10);
        prop_assert!((&b * b.transpose() - &mats.a).amax() <= 1e-10);
    }

    #[test]
    fn a_is_positive_semidefinite((net, _) in arb_network(32, 8)) {
        let a = build_matrices(&net).a;
        let eig = SymmetricEigen::new(a.clone());
        let norm = eig.eigenvalues.amax();
        prop_assert!(eig.eigenvalues.min() >= -1e-9 * norm);
    }

    #[test]
    fn primary_encoding_is_unit_and_splits_energy((net, state) in arb_network(32, 8)) {
        let psi = encode_primary(&net, &state).unwrap();
        let e = energy(&net, &state);
        prop_assert!((psi.norm() - 1.0).abs() <= 1e-12);
        let kinetic: f64 = psi.amplitudes.rows(0, net.len()).iter().map(|a| a.norm_sqr()).sum();
        prop_assert!((kinetic - e.kinetic / e.total).abs() <= 1e-10);
    }

    #[test]
    fn pair_index_round_trips(n in 1usize..40, a in 0usize..40, b in 0usize..40) {
        let (j, k) = ((a % n).min(b % n), (a % n).max(b % n));
        let idx = pair_index(n, j, k);
        prop_assert!(idx < n * (n + 1) / 2);
        prop_assert_eq!(pair_of_index(n, idx), (j, k));
    }

    #[test]
    fn network_json_round_trips((net, _) in arb_network(16, 4)) {
        let back = SpringNetwork::from_json(&net.to_json()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn alternative_energy_is_conserved((net, state) in arb_network(16, 4)) {
        let mats = build_matrices(&net);
        let at = |t: f64| {
            let s = evolve_exact(&net, &state, t).unwrap();
            (s.x.component_mul(&mats.sqrt_masses), s.v.component_mul(&mats.sqrt_masses))
        };
        let (y0, v0) = at(0.0);
        let f0 = alternative_energy(&mats, &y0, &v0);
        prop_assume!(f0 > 1e-8);
        for t in [0.3, 2.0, 7.5, 40.0] {
            let (y, v) = at(t);
            prop_assert!((alternative_energy(&mats, &y, &v) - f0).abs() <= 1e-8 * f0);
            prop_assert!((encode_alternative(&mats, &y, &v).unwrap().norm() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn exact_evolution_conserves_energy((net, state) in arb_network(64, 8), t in 0.0f64..100.0) {
        let e0 = energy(&net, &state).total;
        let e = energy(&net, &evolve_exact(&net, &state, t).unwrap()).total;
        prop_assert!((e - e0).abs() <= 1e-9 * e0);
    }

    #[test]
    fn hamiltonian_evolution_matches_newton((net, state) in arb_network(64, 8), t in 0.0f64..100.0) {
        let prop = HamiltonianPropagator::from_matrices(&build_matrices(&net));
        let psi = prop.evolve(&encode_primary(&net, &state).unwrap(), t).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() <= 1e-10);
        let classical = encode_primary(&net, &evolve_exact(&net, &state, t).unwrap()).unwrap();
        prop_assert!((psi.amplitudes - classical.amplitudes).norm() <= 1e-8);
    }

    #[test]
    fn single_mode_averages(seed in any::<u64>(), n in 2usize..12, pick in 0usize..12, phase in 0.0f64..std::f64::consts::TAU) {
        let (net, _) = network(seed, n, 3);
        let mats = build_matrices(&net);
        let modes = NormalModes::new(&mats).unwrap();
        let k = pick % n;
        let w = modes.frequencies()[k];
        prop_assume!(w > 1e-3);
        // y(0) = cos(phase) e_k, ydot(0) = -w sin(phase) e_k
        let e_k = modes.modes().column(k).into_owned();
        let x = (&e_k * phase.cos()).component_div(&mats.sqrt_masses);
        let v = (&e_k * (-w * phase.sin())).component_div(&mats.sqrt_masses);
        let start = ClassicalState::new(x, v);
        let period = std::f64::consts::TAU / w;
        let samples = 64;
        let (mut kin, mut pot) = (0.0, 0.0);
        for i in 0..samples {
            let s = modes.evolve(&start, period * i as f64 / samples as f64);
            kin += s.v.component_mul(&mats.sqrt_masses).norm_squared();
            pot += s.x.component_mul(&mats.sqrt_masses).norm_squared();
        }
        prop_assert!((kin - w * w * pot).abs() / samples as f64 <= 1e-8);
    }

    #[test]
    fn qpe_error_within_bound(seed in any::<u64>(), n in 1usize..8, t in 0.0f64..20.0, eps_exp in 1.0f64..4.0) {
        let mut rng = common::rng(seed);
        use rand::Rng;
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        let a = DMatrix::from_diagonal(&DVector::from_iterator(n, w.iter().map(|x| x * x)));
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let eps_pe = 10f64.powf(-eps_exp);
        let emu = QpeEmulator::new(&a).unwrap();
        let got = emu.evolve(&encode_generalized(&a, &y, &v).unwrap(), t, eps_pe).unwrap();
        let yt = DVector::from_fn(n, |j, _| y[j] * (w[j] * t).cos() + v[j] / w[j] * (w[j] * t).sin());
        let vt = DVector::from_fn(n, |j, _| v[j] * (w[j] * t).cos() - w[j] * y[j] * (w[j] * t).sin());
        let exact = encode_generalized(&a, &yt, &vt).unwrap();
        prop_assert!((got.amplitudes - exact.amplitudes).norm() <= qpe_error_bound(t, eps_pe, emu.lambda_min()) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn verlet_conserves_energy_loosely((net, state) in arb_network(12, 4), t in 1.0f64..100.0) {
        let e0 = energy(&net, &state).total;
        let s = evolve_newton(&net, &state, t, 1e-3 * verlet_stability_bound(&net)).unwrap();
        prop_assert!((energy(&net, &s).total - e0).abs() <= 1e-5 * e0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn block_error_within_predicted(net in arb_small_network(), r in 3u32..12) {
        let cfg = QuantizationConfig::from_budget(r, &net);
        let be = block_encode_b(&net, cfg).unwrap();
        let err_b = block_error(&be, &padded_b(&net)).unwrap();
        prop_assert!(err_b <= 4.0 * predicted_error(&net, cfg).unwrap());
        let be_h = block_encode_h(&be).unwrap();
        let err_h = block_error(&be_h, &padded_h(&net)).unwrap();
        prop_assert!(err_h <= err_b + 1e-12);
        prop_assert!((&be_h.block - be_h.block.transpose()).amax() <= 1e-12);
        let scaled = spectral_norm(&(&be_h.block * be_h.normalization));
        prop_assert!(scaled <= spectral_norm(&padded_h(&net)) + be_h.normalization * err_h + 1e-12);
    }

    #[test]
    fn circuit_block_matches_closed_form(net in arb_small_network(), r in 2u32..6) {
        let cfg = QuantizationConfig::from_budget(r, &net);
        let a = block_encode_b(&net, cfg).unwrap();
        let b = block_encode_b_circuit(&net, cfg).unwrap();
        prop_assert!((a.block - b.block).amax() <= 1e-12);
    }

    #[test]
    fn prepared_state_is_the_encoding((net, state) in arb_network(8, 3)) {
        let prep = prepare_initial_state(&net, &state.x, &state.v).unwrap();
        prop_assert!(prep.success_amplitude > 0.0 && prep.success_amplitude <= 1.0 + 1e-12);
        let psi = encode_primary(&net, &state).unwrap();
        let n = net.len();
        for j in 0..n {
            prop_assert!((prep.amplitudes[j] / prep.success_amplitude - psi.amplitudes[j]).norm() <= 1e-10);
        }
        for j in 0..n {
            for k in j..n {
                let (padded, compact) = padded_slot(n, j, k);
                let got = prep.amplitudes[n + padded] / prep.success_amplitude;
                prop_assert!((got - psi.amplitudes[n + compact]).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn quantize_error_below_one_step(value in 0.0f64..1.0, max in 0.1f64..10.0, bits in 1u32..30) {
        let v = value * max;
        let q = quantize(v, max, bits).unwrap();
        prop_assert!(q <= 1u64 << bits);
        let back = max * q as f64 / (bits as f64).exp2();
        prop_assert!(back <= v + 1e-12 && v - back < max / (bits as f64).exp2());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fractions_partition((net, state) in arb_network(16, 4), mask in any::<u64>()) {
        let psi = encode_primary(&net, &state).unwrap();
        let n = net.len();
        let inside: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let outside: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 0).collect();
        let kin_all = exact_fraction(&psi, &Subset::vertices(0..n)).unwrap();
        let split = exact_fraction(&psi, &Subset::vertices(inside.clone())).unwrap()
            + exact_fraction(&psi, &Subset::vertices(outside)).unwrap();
        prop_assert!((split - kin_all).abs() <= 1e-12);
        let edges: Vec<(usize, usize)> = net.springs().iter().map(|s| (s.j, s.k)).collect();
        let pot_all = exact_fraction(&psi, &Subset::edges(edges.clone())).unwrap();
        prop_assert!((kin_all + pot_all - 1.0).abs() <= 1e-12);
        let e = energy(&net, &state);
        prop_assert!((pot_all - e.potential / e.total).abs() <= 1e-10);
        // monotone under inclusion
        let half: Vec<(usize, usize)> = edges.iter().copied().step_by(2).collect();
        prop_assert!(exact_fraction(&psi, &Subset::edges(half)).unwrap() <= pot_all + 1e-15);
        prop_assert!(exact_fraction(&psi, &Subset::vertices(inside)).unwrap() <= kin_all + 1e-15);
    }

    #[test]
    fn sampling_is_reproducible((net, state) in arb_network(10, 3), seed in any::<u64>()) {
        let psi = encode_primary(&net, &state).unwrap();
        let subset = Subset::vertices([0]);
        let a = sample_estimate(&psi, &subset, 0.2, 0.1, seed).unwrap();
        let b = sample_estimate(&psi, &subset, 0.2, 0.1, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn chain_reduction_commutes_with_evolution(n in 2usize..=8, seed in any::<u64>(), t in 0.0f64..30.0) {
        let inst = generate(n, seed).unwrap();
        let size = inst.network.len();
        let modes = NormalModes::new(&build_matrices(&inst.network)).unwrap();
        let full = modes.evolve(&ClassicalState::kicked(size, inst.entrance()), t);
        let projected = project_to_columns(n, &full.v);
        let chain = reduce_to_chain(n).unwrap().velocities(t);
        prop_assert!((projected - chain).amax() <= 1e-8);
    }

    #[test]
    fn chain_spectrum_is_persymmetric(n in 2usize..=64) {
        let chain = reduce_to_chain(n).unwrap();
        let v = chain.eigenvectors();
        for l in 0..2 * n {
            prop_assert!((v[(0, l)].abs() - v[(2 * n - 1, l)].abs()).abs() <= 1e-10);
        }
        prop_assert!((chain.p_exit_limit() - chain.p_exit_limit_from_overlaps()).abs() <= 1e-12);
        // lambda_min ~ 2^-n drops below double resolution past n ~ 40
        // LDL^T pivots of the tridiagonal chain are all positive iff it is positive definite
        if n <= 40 {
            let m = &chain.matrix;
            let mut pivot = m[(0, 0)];
            for i in 1..2 * n {
                prop_assert!(pivot > 0.0);
                pivot = m[(i, i)] - m[(i, i - 1)].powi(2) / pivot;
            }
            prop_assert!(pivot > 0.0);
        }
    }

    #[test]
    fn compiled_instances_keep_invariants(c in arb_circuit(), t in 0.0f64..30.0) {
        let inst = bqpred::compile(&c).unwrap();
        let a = &inst.a;
        let n = a.nrows();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        prop_assert!((a - a.transpose()).amax() == 0.0);
        for j in 0..n {
            prop_assert_eq!(a[(j, j)], 4.0);
            prop_assert!((0..n).filter(|&k| a[(j, k)] != 0.0).count() <= 4);
            for k in (0..n).filter(|&k| k != j) {
                prop_assert!([0.0, -r, -1.0].iter().any(|v| (a[(j, k)] - v).abs() < 1e-15));
            }
            prop_assert!(inst.network.kappa(j, j) >= 4.0 - (1.0 + 2.0 * r) - 1e-12);
        }
        let reference = bqpred::reference_matrix(&c);
        prop_assert!((&reference - bqpred::clock_conjugation(&c)).amax() <= 1e-10);
        let encoded = bqpred::InstanceDynamics::new(a, &inst.initial_velocity).unwrap().velocities(t);
        let plain = bqpred::InstanceDynamics::new(&reference, &inst.initial_velocity).unwrap().velocities(t);
        prop_assert!((&encoded - plain).amax() <= 1e-8);
        prop_assert!((encoded - bqpred::structural_velocities(&c, t)).amax() <= 1e-8);
    }

    #[test]
    fn clock_alpha_closed_form(gates in 1usize..=30, t in 0.0f64..100.0) {
        let direct = *bqpred::clock_alphas(gates, t).last().unwrap();
        prop_assert!((bqpred::chain_alpha(gates, t) - direct).abs() <= 1e-10);
    }

    #[test]
    fn uniform_sum_law_is_exact(terms in 1u32..6, span in 0u64..60) {
        let counts = bqpred::uniform_sum_counts(terms, span);
        prop_assert_eq!(counts.len() as u64, terms as u64 * span + 1);
        prop_assert_eq!(counts.iter().sum::<u128>(), (span as u128 + 1).pow(terms));
        // symmetric about the middle
        prop_assert!(counts.iter().eq(counts.iter().rev()));
    }
}

#[test]
fn lowest_chain_eigenvalue_halves_per_level() {
    let lows: Vec<f64> = (8..=24).map(|n| reduce_to_chain(n).unwrap().eigenvalues()[0]).collect();
    for w in lows.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.45..=0.55).contains(&ratio), "ratio {ratio}");
    }
}
