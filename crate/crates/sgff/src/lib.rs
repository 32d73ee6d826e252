//! Numerics for the form factor series of the exponential of the field in the
//! Sinh-Gordon model: special functions and potentials, form factor summands and
//! their bounds, discretised equilibrium measures, and the closed-form large-N
//! characterisation of the equilibrium measure and its energy.

pub mod cli;
pub mod closedform;
pub mod eqmeasure;
pub mod error;
pub mod formfactor;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
