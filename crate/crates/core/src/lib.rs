//! Quantum linear Boltzmann dynamics of a test particle in an ideal gas.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod model;
pub mod quadrature;
pub mod structure_factor;
pub mod generator;
pub mod scattering;
pub mod moments;
pub mod brownian;
pub mod jump;
pub mod covariant;
pub mod config;
pub mod validation;
pub mod cli_io;

pub use error::{Error, Result};
