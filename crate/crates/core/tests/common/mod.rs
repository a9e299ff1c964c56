//! Scenarios shared between the module tests and the acceptance run.
#![allow(dead_code)]

pub mod admissibility;
pub mod biot;
pub mod carleman;
pub mod em;
pub mod sweep;
pub mod twin;
