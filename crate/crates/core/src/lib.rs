//! Simulation of microwave-engineered XXZ spin dynamics in arrays of
//! dipole-coupled Rydberg atoms.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: atom geometries and the dipolar coupling matrix.
//! - [`hamiltonian`]: XX / XXZ / XYZ pair Hamiltonians, the driven
//!   Hamiltonian and the toggling-frame average of a pulse sequence.
//! - [`pulse`]: pulse envelopes, the four-pulse cycle and axis-error draws.
//! - [`propagate`]: exact static and driven propagation, analytic two-atom
//!   results and the moving-average cluster expansion.
//! - [`measure`]: state preparation and readout with SPAM errors.
//! - [`observe`]: magnetisations, spin-flip counts, domain-wall statistics.
//! - [`scenarios`]: configuration-driven experiment runner used by the `sim`
//!   binary.
//!
//! # Conventions
//!
//! Lengths are in μm, couplings and Rabi frequencies in MHz (linear
//! frequency) and times in μs. A Hamiltonian `H` given in MHz evolves a state
//! as `exp(-i·2π·H·t)`.
//!
//! Basis states of `N` atoms are indexed by an integer whose bit `i` holds
//! atom `i` (little-endian); bit value 1 is `|↑⟩` and `σ^z|↑⟩ = +|↑⟩`. The
//! Pauli `σ^y` is the standard one, `σ^y|↓⟩ = -i|↑⟩`, `σ^y|↑⟩ = i|↓⟩`.

pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod measure;
pub mod observe;
pub mod propagate;
pub mod pulse;
pub mod rng;
pub mod scenarios;
pub mod state;

pub use error::{Result, SimError};

pub use num_complex::Complex64 as C64;
