//! Pseudo-spectral solver for the stochastically forced 2D Navier-Stokes
//! equation in vorticity form on the torus, with tools to study its
//! low/high mode reduction, Girsanov reweighting and mixing behaviour.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod forcing;
pub mod girsanov;
pub mod integrator;
pub mod mixing;
pub mod parallel;
pub mod partition;
pub mod reduction;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
