//! Fourier-mode solver and estimate harness for the perturbative Landau and
//! non-cutoff Boltzmann equations around the global Maxwellian.

pub mod boltzmann;
pub mod channel;
pub mod checkpoint;
pub mod collision;
pub mod config;
pub mod decay;
pub mod error;
pub mod estimates;
pub mod fft;
pub mod grid;
pub mod landau;
pub mod lattice;
pub mod macro_micro;
pub mod runner;
pub mod stencil;
pub mod symmetry;
pub mod torus;

pub use error::{KineticError, Result};
