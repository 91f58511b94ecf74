//! Glauber dynamics of the 2-D Ising model in a box with corner-strip
//! boundary conditions: exact spectral gaps, variational bounds, FK and
//! Swendsen–Wang machinery, crossing events and surface-tension estimates.

pub mod error;
pub mod events;
pub mod fk;
pub mod geometry;
pub mod harness;
pub mod ising;
pub mod spectral;
pub mod stats;
pub mod tension;
pub mod union_find;

pub use error::{Error, Result};
pub use geometry::{BoundarySpec, Geometry, Site};
pub use ising::{ModelParams, RateFamily, SpinConfig};
