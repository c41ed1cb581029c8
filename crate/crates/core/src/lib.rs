//! Numerical checks for gradient flows in metric spaces and the
//! Hamilton-Jacobi equations built on them.

// `!(x > 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evi;
pub mod hamiltonians;
pub mod laplace;
pub mod quadrature;
pub mod space;
pub mod tataru;
pub mod viscosity;

pub use error::{Error, Result};
pub use space::{FlowTrajectory, ModelSpace, Potential, SpaceKind, SpacePoint};
