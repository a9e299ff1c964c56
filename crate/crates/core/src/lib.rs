//! Forward simulation and initial-time inversion for the one-way coupled
//! Maxwell–Biot electroseismic model.

pub mod biot;
pub mod carleman;
pub mod em;
pub mod error;
pub mod field;
pub mod galerkin;
pub mod grid;
pub mod io;
pub mod inverse;
pub mod ops;
pub mod par;
pub mod params;
pub mod pipeline;
pub mod quad;
pub mod stability;

pub use error::{Error, Result};
