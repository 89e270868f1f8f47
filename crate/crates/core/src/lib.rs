//! Simulation and estimation for Gaussian processes with a seasonal spectral pole.

pub mod bias_constants;
pub mod cli;
pub mod demodulation;
pub mod error;
pub mod estimation;
pub mod likelihood;
pub mod optimize;
pub mod quadrature;
pub mod semiparametric;
pub mod simulation;
pub mod spectral_models;

pub use error::{Result, SeaperError};
