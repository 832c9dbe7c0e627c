//! Minimum edge multiway cut (MEMC) solvers built on a shared QUBO encoding.
//!
//! An instance is an undirected, connected, edge-weighted graph with `k >= 2`
//! terminals. The goal is a minimum-cost edge set whose removal leaves every
//! terminal in its own component. The crate provides:
//!
//! * [`instances`]: the instance model, random generators and the text file format;
//! * [`qubo`]: the one-hot QUBO encoding, its Ising form and bitstring decoding;
//! * [`classical`]: exhaustive oracles, max-flow min cut, the isolating-cut
//!   heuristic and simulated annealing;
//! * [`qaoa`]: a statevector simulator for QAOA over the diagonal cost Hamiltonian;
//! * [`photonic`]: a Fock-space simulator for beam-splitter/phase-shifter meshes
//!   with parity readout;
//! * [`optim`]: derivative-free optimizers shared by the variational backends;
//! * [`bench`]: the experiment harness and report writers.

pub mod bench;
pub mod bitstring;
pub mod classical;
pub mod error;
pub mod instances;
pub mod optim;
pub mod photonic;
pub mod qaoa;
pub mod qubo;
mod rng;

pub use bitstring::Bitstring;
pub use error::{Error, Result};
pub use instances::{CutSolution, Edge, MulticutInstance};
pub use qubo::{IsingModel, QuboModel};

/// Absolute tolerance used when comparing energies and cut costs.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

/// True when `a` and `b` agree within [`ENERGY_TOLERANCE`], scaled for large magnitudes.
pub fn energies_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= ENERGY_TOLERANCE * (1.0 + a.abs().max(b.abs()))
}
