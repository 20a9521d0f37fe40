//! Nonlinear solvers: barrier-bounded Picard iteration, damped Newton with
//! a rank-one nonlocal correction, Sobolev-gradient energy descent and a
//! discretized-path mountain-pass search.

mod barrier;
mod descent;
mod geometry;
mod multi_start;
mod mountain_pass;
mod newton;
mod picard;

pub use barrier::{build_barrier, Barrier};
pub use descent::{descent_from, descent_minimize};
pub use geometry::{step1_geometry, PassGeometry};
pub use mountain_pass::{mountain_pass_search, mountain_pass_with};
pub use multi_start::{dedup_outcomes, multi_start, multi_start_with};
pub use newton::newton_nonlocal;
pub use picard::{picard_iterate, picard_iterate_with};

use std::fmt;

use crate::energy::{self, EnergyBreakdown};
use crate::error::{KirchhoffError, Result};
use crate::linalg;
use crate::mesh::{DomainMesh, GridFunction};
use crate::problem::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverId {
    Picard,
    Newton,
    Descent,
    MountainPass,
}

impl SolverId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverId::Picard => "picard",
            SolverId::Newton => "newton",
            SolverId::Descent => "descent",
            SolverId::MountainPass => "mountain-pass",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    StrictlyPositive,
    Nonnegative,
    SignChanging,
}

impl Positivity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Positivity::StrictlyPositive => "strictly-positive",
            Positivity::Nonnegative => "nonnegative",
            Positivity::SignChanging => "sign-changing",
        }
    }
}

impl fmt::Display for Positivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sign class from nodal values with the tolerance `1e−10·sup|u|`.
pub fn classify_positivity(u: &GridFunction) -> Positivity {
    let tol = 1e-10 * u.max_abs();
    let min = u.min_value();
    if min > tol {
        Positivity::StrictlyPositive
    } else if min >= -tol {
        Positivity::Nonnegative
    } else {
        Positivity::SignChanging
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Sup-norm tolerance on the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial Newton step length in `(0, 1]`.
    pub damping: f64,
    pub seed: u64,
    /// Radius of the seminorm ball for local minimization.
    pub rho0: Option<f64>,
    /// Number of nodes on the discretized mountain-pass path.
    pub path_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 500,
            damping: 1.0,
            seed: 42,
            rho0: None,
            path_nodes: 32,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(KirchhoffError::InvalidParams(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(KirchhoffError::InvalidParams(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if let Some(r) = self.rho0 {
            if !(r > 0.0) {
                return Err(KirchhoffError::InvalidParams(format!(
                    "ball radius must be positive, got {r}"
                )));
            }
        }
        if self.path_nodes < 3 {
            return Err(KirchhoffError::InvalidParams(format!(
                "mountain-pass path needs at least 3 nodes, got {}",
                self.path_nodes
            )));
        }
        if self.max_iter == 0 {
            return Err(KirchhoffError::InvalidParams("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: GridFunction,
    pub solver: SolverId,
    pub iterations: usize,
    /// `sup |energy_gradient(u)|`.
    pub residual: f64,
    pub energy: EnergyBreakdown,
    pub converged: bool,
    pub positivity: Positivity,
    pub seminorm: f64,
    /// Residual after each iteration, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub note: Option<String>,
}

impl SolveOutcome {
    pub fn sup_norm(&self) -> f64 {
        self.solution.max_abs()
    }

    pub fn is_positive_solution(&self) -> bool {
        self.converged && self.positivity == Positivity::StrictlyPositive
    }
}

/// `sup |(1 + b‖∇u‖^{2α})(−Δ_h u) − (u⁺)^p − λf|`.
pub fn residual_norm(mesh: &DomainMesh, params: &ProblemParams, u: &GridFunction) -> Result<f64> {
    Ok(energy::energy_gradient(mesh, params, u)?.max_abs())
}

/// Dirichlet form, `K u` and the gradient of raw values in one pass.
pub(crate) struct Evaluation {
    pub ku: Vec<f64>,
    pub d: f64,
    pub grad: Vec<f64>,
    pub residual: f64,
}

pub(crate) fn evaluate(mesh: &DomainMesh, params: &ProblemParams, u: &[f64]) -> Evaluation {
    let ku = mesh.stiffness_apply(u);
    let d = linalg::dot(u, &ku).max(0.0);
    let grad = energy::gradient_from_parts(mesh, params, u, &ku, d);
    let residual = linalg::max_abs(&grad);
    Evaluation {
        ku,
        d,
        grad,
        residual,
    }
}

pub(crate) fn finish(
    mesh: &DomainMesh,
    params: &ProblemParams,
    solution: GridFunction,
    solver: SolverId,
    iterations: usize,
    residual_history: Vec<f64>,
    tol: f64,
) -> Result<SolveOutcome> {
    let residual = residual_norm(mesh, params, &solution)?;
    let d = crate::mesh::dirichlet_form(mesh, &solution)?;
    let energy = energy::breakdown(mesh, params, solution.values(), d);
    Ok(SolveOutcome {
        positivity: classify_positivity(&solution),
        seminorm: d.sqrt(),
        converged: residual <= tol && residual.is_finite(),
        solution,
        solver,
        iterations,
        residual,
        energy,
        residual_history,
        note: None,
    })
}
