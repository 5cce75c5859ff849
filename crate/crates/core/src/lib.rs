//! Simulator for the closure- and mass-constrained L2 gradient flow of closed
//! planar elastic wires carrying a density that modulates their stiffness.
//!
//! The unknowns are the inclination angle `theta` of an arc-length
//! parametrised curve of fixed length and a density `rho`, both sampled on a
//! uniform periodic grid. The crate provides
//!
//! - [`grid`]: periodic difference operators, quadrature, cyclic tridiagonal solves;
//! - [`model`]: energy, gradients, multipliers, constraints, curve reconstruction;
//! - [`flow`]: semi-implicit and RK4 time stepping with an adaptive run loop;
//! - [`stationary`]: stationarity residuals and Newton refinement of limits;
//! - [`diagnostics`]: dissipation and conservation audits, order studies,
//!   and a Lojasiewicz slope probe;
//! - [`scenario`] and [`cli`]: initial data families, configuration files,
//!   and the batch commands behind the `wireflow` binary.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod grid;
pub mod model;
pub mod scenario;
pub mod stationary;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use model::{AngleDensityState, ModelParams, Multipliers, StiffnessProfile};
