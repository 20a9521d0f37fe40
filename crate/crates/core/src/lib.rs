//! Finite-difference solvers and verification tools for the Dirichlet
//! problem of the inhomogeneous Kirchhoff equation
//!
//! ```text
//! −(1 + b‖∇u‖₂^{2α}) Δu = (u⁺)^p + λ f   in Ω,   u = 0 on ∂Ω
//! ```
//!
//! on intervals, rectangles and radially symmetric balls in `R³`.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod energy;
pub mod error;
mod linalg;
pub mod mesh;
pub mod problem;
pub mod reduction;
pub mod solvers;
pub mod verify;

pub use error::{KirchhoffError, Result};
pub use mesh::{build_mesh, DomainKind, DomainMesh, GridFunction};
pub use problem::{MeshConstants, ProblemParams, Regime};
