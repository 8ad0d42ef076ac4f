//! Core numerics for the one-to-one weak-noise problem of the KPZ equation:
//! special functions, the rate function, scattering data, kernels, Fredholm
//! solves, validation checks and large-scale asymptotics.

pub mod asymptotics;
pub mod error;
pub mod fredholm;
pub mod kernels;
pub mod quad;
pub mod rate;
pub mod scattering;
pub mod specfun;
pub mod validate;

pub use asymptotics::{AsymptoticTable, Envelope, SolitonProfile};
pub use error::{Error, Result};
pub use fredholm::{FieldGrid, FredholmSolver, GridParams};
pub use rate::{Branch, Problem, ScaledProblem, SolutionSpec};
pub use validate::{Check, ValidationConfig, ValidationReport};
