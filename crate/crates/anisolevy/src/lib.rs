//! Simulation and analysis tools for SDEs driven by anisotropic Lévy noise.

pub mod cli;
pub mod density;
pub mod error;
pub mod experiments;
pub mod hypotheses;
pub mod levy_models;
pub(crate) mod numerics;
pub mod sampling;
pub mod sde;

pub use error::{Error, Result};
