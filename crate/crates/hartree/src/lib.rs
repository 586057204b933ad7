//! Spectral laboratory for a defocusing Hartree equation with a harmonic trap:
//! mass-constrained ground states by normalized gradient flow, convexity
//! certificates for the energy in density form, and split-step propagation
//! with conservation and orbital-stability monitors.

pub mod cli;
pub mod convexity;
pub mod dynamics;
pub mod error;
mod fft;
pub mod functionals;
pub mod grid;
pub mod ground;
pub mod io;
pub mod riesz;

pub use error::{Error, Result};
