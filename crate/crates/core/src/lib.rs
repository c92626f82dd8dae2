//! Domain generalization for sensor-based activity recognition with per-domain feature branches.

pub mod data;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod network;
pub mod training;

pub use error::{Error, Result};
