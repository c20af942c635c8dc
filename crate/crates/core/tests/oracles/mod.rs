//! Independent oracles and the checks built on them. Shared by the core
//! integration tests and the acceptance suite in the bench crate.
#![allow(dead_code)]

pub mod diffusion;
pub mod grid;
pub mod invariants;
pub mod metric_checks;
pub mod rewiring;
