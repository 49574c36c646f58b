//! Small hand-checked values, one per module.

use harmonet::blockenc::quantize;
use harmonet::bqpred::{chain_alpha, clock_alphas, perfect_chain, uniform_sum_counts};
use harmonet::dynamics::evolve_exact;
use harmonet::estimate::{ae_query_model, hoeffding_shots};
use harmonet::gluedtrees::column_sizes;
use harmonet::netcore::{pair_count, pair_index, ClassicalState, Spring, SpringNetwork};
use nalgebra::DVector;

#[test]
fn wall_spring_gives_a_cosine() {
    // m = 4, kappa = 9: omega = 3/2
    let net = SpringNetwork::new(vec![4.0], vec![Spring { j: 0, k: 0, kappa: 9.0 }], 1).unwrap();
    let start = ClassicalState::new(DVector::from_element(1, 1.0), DVector::zeros(1));
    let end = evolve_exact(&net, &start, 2.0).unwrap();
    assert!((end.x[0] - 3f64.cos()).abs() < 1e-14);
    assert!((end.v[0] + 1.5 * 3f64.sin()).abs() < 1e-14);
}

#[test]
fn pair_slots_fill_row_by_row() {
    assert_eq!(pair_count(3), 6);
    let order: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)].iter().map(|&(j, k)| pair_index(3, j, k)).collect();
    assert_eq!(order, vec![0, 1, 2, 3, 4, 5]);
}

#[test]
fn quantize_floors_and_saturates() {
    assert_eq!(quantize(0.3, 1.0, 8).unwrap(), 76);
    assert_eq!(quantize(1.0, 1.0, 8).unwrap(), 256);
    assert_eq!(quantize(0.0, 2.0, 5).unwrap(), 0);
    assert!(quantize(1.5, 1.0, 8).is_err());
}

#[test]
fn shot_counts() {
    assert_eq!(hoeffding_shots(0.1, 0.01).unwrap(), 265);
    assert_eq!(hoeffding_shots(0.05, 0.05).unwrap(), 738);
    assert_eq!(ae_query_model(0.1, 0.01).unwrap(), 47);
}

#[test]
fn column_sizes_double_then_halve() {
    assert_eq!(column_sizes(3), vec![1, 2, 4, 4, 2, 1]);
}

#[test]
fn one_gate_clock() {
    for t in [0.0, 0.7, 3.1, 12.0] {
        let want = 0.5 * ((3f64.sqrt() * t).cos() - (5f64.sqrt() * t).cos());
        assert!((chain_alpha(1, t) - want).abs() < 1e-14);
        assert!((clock_alphas(1, t)[1] - want).abs() < 1e-12);
    }
}

#[test]
fn one_gate_engineered_chain() {
    // diagonal 37/16 on both sites, coupling 3/4
    let report = perfect_chain(1).unwrap();
    assert!((report.eigenvalues[0] - 1.5625).abs() < 1e-13);
    assert!((report.eigenvalues[1] - 3.0625).abs() < 1e-13);
}

#[test]
fn two_dice_of_three_faces() {
    assert_eq!(uniform_sum_counts(2, 2), vec![1, 2, 3, 2, 1]);
    assert_eq!(uniform_sum_counts(0, 5), vec![1]);
}
