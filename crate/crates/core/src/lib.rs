//! Minimum spectral gap of adiabatic MAXCUT evolution.
//!
//! The qubit Hamiltonian is fermionized with a two-dimensional Jordan-Wigner
//! map, the instantaneous ground state is found with a per-site Kohn-Sham
//! self-consistent field, and the gap follows from a single-pole linear
//! response correction. An exact-diagonalization oracle and a Schrödinger
//! propagator validate the pipeline on small registers.

pub mod eigen;
pub mod error;
pub mod evolution;
pub mod fermion;
pub mod green;
pub mod instance;
pub mod io;
pub mod operator;
pub mod oracle;
pub mod response;
pub mod scan;
pub mod scf;
pub mod xc;

pub use error::{Error, Result};
