//! Convex integration for very weak solutions of the 2-Hessian equation
//! `σ₂(∇²v) = f`, with and without Dirichlet data, on uniform grids.
//!
//! The pipeline: [`elliptic`] builds the background data, [`scheduler`] picks
//! a parameter schedule whose inequality ledger holds, [`stages`] runs the
//! corrugation stages built from [`decomp`] and [`corrugation`], and
//! [`verify`] measures the result independently.

pub mod config;
pub mod corrugation;
pub mod decomp;
pub mod elliptic;
pub mod error;
pub mod experiment;
pub mod field;
pub mod problem;
pub mod scheduler;
pub mod stages;
pub mod verify;

pub use error::{Error, Result};
