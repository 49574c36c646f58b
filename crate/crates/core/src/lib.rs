//! Networks of coupled classical harmonic oscillators and their quantum encodings.
//!
//! Masses sit on the vertices of a sparse graph, springs on its edges (a spring
//! from a mass to itself ties it to the wall). The state of the network is mapped
//! to a normalized complex vector whose Schrodinger evolution reproduces Newton's
//! equations; the modules here build that map, evolve it several independent ways,
//! block-encode the generating Hamiltonian, and reduce two problem families
//! (glued trees, BQP circuits) to oscillator networks.

pub mod blockenc;
pub mod bqpred;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod gluedtrees;
pub mod linalg;
pub mod netcore;

pub use error::{Error, Result};
