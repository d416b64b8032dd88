//! Satellite-to-ground CV-QKD channel simulation and phase-correction
//! support: turbulence profiles, split-step beam propagation, dataset
//! campaigns and key-rate analysis.

pub mod atmosphere;
pub mod dataset;
pub mod error;
pub mod optics;
pub mod qkd;
pub mod quadrature;
pub mod seed;

pub use error::{Error, Result};
