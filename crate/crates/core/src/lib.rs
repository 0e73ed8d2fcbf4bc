//! Simulation and diffusion-limit analysis of controlled multi-type
//! branching processes.
//!
//! A model is a set of offspring laws, one per type, and a control law that
//! decides how many individuals of each type reproduce. [`model::classify`]
//! sorts a model by the spectral radius of mΛ, [`model::limit_coefficients`]
//! gives the drift and diffusion of the limiting process, [`engine`] simulates
//! paths and [`verify`] compares simulations with the limit.

pub mod engine;
pub mod error;
pub mod laws;
pub mod limit;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
