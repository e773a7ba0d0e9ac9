//! Individual-based simulation of spatially structured populations with
//! adaptive traits.
//!
//! Individuals diffuse in a bounded interval with normal reflection, give
//! birth to clones or mutants and die from natural causes or local
//! competition. Two exact event engines are provided (a general reference
//! engine and an O(1)-per-event engine for logistic competition), together
//! with finite-volume solvers for the nonlocal and local reaction-diffusion
//! equations that describe the large-population limit.

pub mod error;
pub mod math;
pub mod model;
pub mod reflect;
pub mod engine;
pub mod pde;
pub mod analysis;
pub mod check;
pub mod cli;
pub mod config;
pub mod output;

pub use error::{Error, Result};
