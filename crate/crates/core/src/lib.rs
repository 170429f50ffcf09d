//! Boundary-domain integral equations for the exterior Dirichlet problem of
//! `div(a grad u) = f` in two dimensions.
//!
//! The variable-coefficient operators are built from a parametrix
//! `P(x, y) = log|x - y| / (2 pi a(x))` and are expressed through harmonic
//! (constant coefficient) layer and volume potentials. The segregated system
//! in the unknowns `(u, psi)`, with `psi` the conormal derivative on the
//! boundary, is discretized by Nyström collocation.

pub mod error;
pub mod coefficient;
pub mod geometry;
pub mod laplace;
pub mod parametrix;
pub mod quadrature;
pub mod system;
pub mod verification;
pub mod vec2;
pub mod volume;

pub use error::{BdieError, ErrorCategory, Result};
pub use vec2::Vec2;
