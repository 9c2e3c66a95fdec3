//! Gaussian analytic functions in generalized Fock spaces with doubling weights.
//!
//! The crate builds the weight machinery (`measure`), the reproducing kernel of
//! the weighted Fock space (`fock`), random functions and point processes
//! (`pointprocess`), locates zero sets (`zeros`) and runs the Monte Carlo
//! experiments that compare those zero sets with a Poisson baseline (`stats`).
//! `config` and `cli` wire everything to JSON configuration files.

pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod geometry;
pub mod measure;
pub mod par;
pub mod pointprocess;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod zeros;

pub use error::{GafError, Result};
pub use num_complex::Complex64;
