//! Simulation and authentication of replicable optical security elements.

pub mod auth;
pub mod correlation;
pub mod error;
pub mod experiment;
pub mod fft2;
pub mod io;
pub mod optics;
mod seed;
pub mod stats;
pub mod surface;

pub use error::{OseError, Result};
