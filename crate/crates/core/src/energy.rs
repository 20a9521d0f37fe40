//! The energy functional
//! `E(u) = ½‖∇u‖² + b/(2(α+1))‖∇u‖^{2(α+1)} − ∫(u⁺)^{p+1}/(p+1) − λ∫fu`
//! and its gradient with respect to the quadrature inner product.

use crate::error::Result;
use crate::mesh::{self, DomainMesh, GridFunction};
use crate::problem::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub nonlocal: f64,
    pub potential: f64,
    pub forcing: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Size of the largest term, the natural roundoff scale of `total`.
    pub fn magnitude(&self) -> f64 {
        self.dirichlet
            .max(self.nonlocal)
            .max(self.potential)
            .max(self.forcing.abs())
    }
}

pub fn energy_eval(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &GridFunction,
) -> Result<EnergyBreakdown> {
    let d = mesh::dirichlet_form(mesh, u)?;
    Ok(breakdown(mesh, params, u.values(), d))
}

pub(crate) fn breakdown(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &[f64],
    d: f64,
) -> EnergyBreakdown {
    let (a, p) = (params.alpha, params.p);
    let dirichlet = 0.5 * d;
    let nonlocal = params.b / (2.0 * (a + 1.0)) * d.powf(a + 1.0);
    let potential = u
        .iter()
        .zip(mesh.weights())
        .map(|(&v, w)| w * v.max(0.0).powf(p + 1.0))
        .sum::<f64>()
        / (p + 1.0);
    let forcing = params.lambda * mesh::weighted_dot(mesh, params.f.values(), u);
    EnergyBreakdown {
        dirichlet,
        nonlocal,
        potential,
        forcing,
        total: dirichlet + nonlocal - potential - forcing,
    }
}

/// `(1 + b‖∇u‖^{2α})(−Δ_h u) − (u⁺)^p − λf`, the Riesz representative of
/// the derivative in the quadrature inner product.
pub fn energy_gradient(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &GridFunction,
) -> Result<GridFunction> {
    mesh.check(u)?;
    let ku = mesh.stiffness_apply(u.values());
    let d = crate::linalg::dot(u.values(), &ku).max(0.0);
    Ok(mesh.wrap(gradient_from_parts(mesh, params, u.values(), &ku, d)))
}

pub(crate) fn gradient_from_parts(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &[f64],
    ku: &[f64],
    d: f64,
) -> Vec<f64> {
    let coef = 1.0 + params.b * d.powf(params.alpha);
    let lam = params.lambda;
    u.iter()
        .zip(ku)
        .zip(mesh.weights())
        .zip(params.f.values())
        .map(|(((&v, &k), &w), &f)| coef * k / w - v.max(0.0).powf(params.p) - lam * f)
        .collect()
}
