//! Structured-grid simulator for the non-isothermal Cahn-Hilliard system
//! together with discrete audits of its balance laws.
//!
//! * [`model`]: constitutive functions and parameters (pointwise).
//! * [`grid`]: cell-centered meshes, Neumann difference operators, quadrature.
//! * [`stepper`]: backward-Euler time integration with damped Newton solves.
//! * [`diagnostics`]: balances, entropy audits, norm monitors and weak-form checks.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod model;
mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{FaceAveraging, Field, Grid};
pub use model::Parameters;
pub use stepper::{SolverConfig, State, Trajectory};
