//! Load truncated fermionic eigenstates onto a simulated quantum register
//! with linear combinations of unitaries, then measure time-dependent
//! observables on them.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`lattice`] builds the Jordan-Wigner mapped Thirring chain and
//!    [`eigen`] diagonalizes it in a fixed particle-number sector, keeping
//!    the `M` largest-magnitude basis amplitudes.
//! 2. [`lcu`] synthesizes the Prep / Select circuits that load those
//!    amplitudes, executed by the dense simulator in [`statevector`].
//! 3. [`observables`] measures Loschmidt echoes, spectra and current
//!    correlators, comparing truncated against full states.

pub mod circuit;
pub mod eigen;
pub mod error;
pub mod evolve;
pub mod hadamard;
pub mod io;
pub mod lattice;
pub mod lcu;
pub mod observables;
pub mod pauli;
pub mod statevector;
pub mod trotter;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
