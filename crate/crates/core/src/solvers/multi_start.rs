use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    build_barrier, descent_minimize, newton_nonlocal, picard_iterate, step1_geometry,
    SolveOutcome, SolverConfig,
};
use crate::error::{KirchhoffError, Result};
use crate::mesh::{DomainMesh, GridFunction};
use crate::problem::{MeshConstants, ProblemParams, Regime};

/// Distinct converged strictly positive solutions from Newton runs started
/// at seeded random combinations `c₁φ₁ + c₂ψ/sup ψ`, plus the Picard and
/// descent outputs. Results are sorted by energy.
///
/// The amplitudes are drawn from `(0, c_max]` where `c_max` is the larger
/// of `2·sup ψ₀` (barrier scale) and `2·t₀` (mountain-pass endpoint scale),
/// whichever exist.
pub fn multi_start(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    n_starts: usize,
) -> Result<Vec<SolveOutcome>> {
    let constants = MeshConstants::compute(mesh, params.p)?;
    multi_start_with(mesh, params, config, n_starts, &constants)
}

pub fn multi_start_with(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    n_starts: usize,
    constants: &MeshConstants,
) -> Result<Vec<SolveOutcome>> {
    config.validate()?;
    if n_starts < 2 {
        return Err(KirchhoffError::InvalidParams(format!(
            "multi_start needs at least 2 starts, got {n_starts}"
        )));
    }
    let regime = params.regime()?;
    let psi = mesh.torsion()?;
    let psi_unit = psi.scaled(1.0 / psi.max_abs());
    let phi = &constants.phi1;

    let geometry = step1_geometry(mesh, params, constants).ok();
    let barrier_scale = build_barrier(mesh, params)
        .ok()
        .map(|b| 2.0 * b.psi0.max_abs());
    let pass_scale = geometry.as_ref().map(|g| 2.0 * g.t0);
    let c_max = match (barrier_scale, pass_scale) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 2.0 * psi.max_abs(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let starts: Vec<GridFunction> = (0..n_starts)
        .map(|_| {
            let c1 = c_max * (1.0 - rng.gen::<f64>());
            let c2 = c_max * (1.0 - rng.gen::<f64>());
            phi.scaled(c1).add_scaled(c2, &psi_unit)
        })
        .collect();

    let mut outcomes: Vec<SolveOutcome> = starts
        .par_iter()
        .map(|u0| newton_nonlocal(mesh, params, config, u0).ok())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    if let Ok(out) = picard_iterate(mesh, params, config) {
        outcomes.push(out);
    }
    let descent_config = match (regime, &geometry) {
        (Regime::A, _) => Some(config.clone()),
        (Regime::B, Some(g)) => Some(SolverConfig {
            rho0: Some(config.rho0.unwrap_or(g.rho0)),
            ..config.clone()
        }),
        _ => None,
    };
    if let Some(cfg) = descent_config {
        if let Ok(out) = descent_minimize(mesh, params, &cfg) {
            outcomes.push(out);
        }
    }
    Ok(dedup_outcomes(outcomes, 10.0 * config.tol))
}

/// Keeps converged strictly positive outcomes, ordered by energy, dropping
/// any within `radius` (sup distance) of a lower-energy one.
pub fn dedup_outcomes(outcomes: Vec<SolveOutcome>, radius: f64) -> Vec<SolveOutcome> {
    let mut positive: Vec<SolveOutcome> = outcomes
        .into_iter()
        .filter(|o| o.is_positive_solution())
        .collect();
    positive.sort_by(|a, b| a.energy.total.total_cmp(&b.energy.total));
    let mut kept: Vec<SolveOutcome> = Vec::new();
    for o in positive {
        if kept
            .iter()
            .all(|k| k.solution.sup_distance(&o.solution) > radius)
        {
            kept.push(o);
        }
    }
    kept
}
