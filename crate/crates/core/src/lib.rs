//! Refined basic coupling for Lévy-driven stochastic Hamiltonian systems:
//! jump sampling, coupled pair simulation, contraction constants, and
//! numerical verification of drift inequalities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod config;
pub mod coupling_sim;
pub mod distance_constants;
pub mod ergodicity;
pub mod error;
pub mod generator;
pub mod levy_measure;
pub mod model;
pub mod quad;
pub mod vector;

pub use error::{Error, Result};
