//! Magnetic-equivalent-circuit simulation of two-phase double-tooth C-core
//! switched reluctance motors with optional embedded magnets.

pub mod characteristics;
pub mod drive;
pub mod error;
pub mod geometry;
pub mod materials;
pub mod mec;
pub mod metrics;
pub mod sim;

pub use error::{Result, SrmError};

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4e-7 * std::f64::consts::PI;
