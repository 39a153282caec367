//! Discontinuous Galerkin time stepping with conforming P1 elements for the
//! one-dimensional heat equation, together with fully computable a
//! posteriori error bounds in `L2(0, T; H1_0)` and `Linf(0, T; L2)`.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod problem;
pub mod quadrature;
pub mod reconstruction;
pub mod spatial_fem;
pub mod time_dg;
pub mod verify;

pub use error::{Error, Result};
