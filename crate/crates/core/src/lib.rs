//! Noisy simulation of the adiabatic lattice Schwinger-model ramp, with
//! per-time-point randomized error cancellation (GREC) and zero-noise
//! extrapolation (ZNE) as mitigation schemes.

pub mod adiabatic;
pub mod circuit;
pub mod config;
pub mod density;
pub mod error;
pub mod export;
pub mod grec;
pub mod metrics;
pub mod model;
pub mod pauli;
pub mod pipeline;
pub mod spectrum;
pub mod zne;

pub use error::{Error, Result};
