use thiserror::Error;

use crate::problem::Regime;

/// Errors raised across the solver suite.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum KirchhoffError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("grid function belongs to a different mesh (expected {expected} values, found {found})")]
    MeshMismatch { expected: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("boundary exponent {0}")]
    BoundaryExponent(String),

    #[error("operation requires regime {expected:?}, parameters are in regime {found:?}")]
    RegimeMismatch { expected: Regime, found: Regime },

    #[error("forcing is not in the class M: Poisson witness is {value:e} at node {node}")]
    NotMember { node: usize, value: f64 },

    #[error("linear solve failed: relative residual {residual:e}")]
    LinearSolve { residual: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate {iteration} left the barrier at node {node}")]
    BarrierEscape { iteration: usize, node: usize },

    #[error("no admissible barrier level for lambda = {lambda}")]
    NoBarrier { lambda: f64 },

    #[error("singular linearized operator")]
    SingularOperator,

    #[error("line search failed at residual {residual:e}")]
    LineSearch { residual: f64 },

    #[error("minimizer pinned to the trust ball boundary (seminorm {seminorm}, radius {radius})")]
    PinnedToBall { seminorm: f64, radius: f64 },

    #[error("mountain-pass geometry unavailable: {0}")]
    Geometry(String),

    #[error("mountain-pass path collapsed (max energy {max_energy:e})")]
    PathCollapse { max_energy: f64 },

    #[error("polished critical point has energy {energy:e} below the mountain-pass floor {floor:e}")]
    BelowPassLevel { energy: f64, floor: f64 },

    #[error("shooting map has no sign change in the scanned bracket")]
    NoSignChange,

    #[error("nonlocal consistency iteration has no fixed point (last t = {last:e})")]
    NoFixedPoint { last: f64 },

    #[error("layer width {width} outside [{min}, {max}]")]
    InvalidLayer { width: f64, min: f64, max: f64 },

    #[error("no solvable lambda found down to {lowest}")]
    NoSolvableLambda { lowest: f64 },

    #[error("no failure found below lambda_max = {lambda_max} (last solvable {lower})")]
    OpenUpperBracket { lower: f64, lambda_max: f64 },
}

pub type Result<T> = std::result::Result<T, KirchhoffError>;
