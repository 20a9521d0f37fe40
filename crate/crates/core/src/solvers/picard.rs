use super::{finish, Barrier, SolveOutcome, SolverConfig, SolverId};
use crate::error::{KirchhoffError, Result};
use crate::mesh::{self, DomainMesh, GridFunction};
use crate::problem::{ProblemParams, Regime};
use crate::reduction;

/// Picard iteration `u_{n+1} = rescale(poisson((u_n⁺)^p + λf))` from the
/// nonlocal linear solution. In the supercritical regime a barrier is
/// built and enforced; elsewhere the iteration runs unbounded.
pub fn picard_iterate(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    if params.regime()? == Regime::C {
        let barrier = super::build_barrier(mesh, params)?;
        picard_iterate_with(mesh, params, config, Some(&barrier))
    } else {
        picard_iterate_with(mesh, params, config, None)
    }
}

/// Picard iteration with an explicit (optional) barrier. Every iterate is
/// checked against `0 ≤ u ≤ ψ₀` when a barrier is given.
pub fn picard_iterate_with(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    barrier: Option<&Barrier>,
) -> Result<SolveOutcome> {
    config.validate()?;
    let mut u = if params.lambda > 0.0 {
        reduction::kirchhoff_linear_solve(mesh, params)?
    } else {
        GridFunction::zeros(mesh)
    };
    let check = |u: &GridFunction, iteration: usize| -> Result<()> {
        match barrier.and_then(|b| b.violation(u)) {
            Some(node) => Err(KirchhoffError::BarrierEscape { iteration, node }),
            None => Ok(()),
        }
    };
    check(&u, 1)?;

    let lf = params.f.scaled(params.lambda);
    let mut history = vec![super::residual_norm(mesh, params, &u)?];
    let mut diffs: Vec<f64> = Vec::new();
    for n in 1..=config.max_iter {
        let rhs = u.map(|v| v.max(0.0).powf(params.p)).add_scaled(1.0, &lf);
        let w = mesh::poisson_solve(mesh, &rhs)?;
        let next = reduction::picard_rescale(mesh, params, &w)?;
        check(&next, n + 1)?;
        let diff = next.sup_distance(&u);
        u = next;
        let res = super::residual_norm(mesh, params, &u)?;
        history.push(res);
        diffs.push(diff);
        if !diff.is_finite() || !res.is_finite() {
            return Err(KirchhoffError::NonConvergence {
                iterations: n,
                residual: res,
            });
        }
        if diff <= config.tol && res <= config.tol {
            return finish(mesh, params, u, SolverId::Picard, n, history, config.tol);
        }
    }
    let mut out = finish(
        mesh,
        params,
        u,
        SolverId::Picard,
        config.max_iter,
        history,
        config.tol,
    )?;
    out.converged = false;
    out.note = Some(tail_note(&diffs));
    Ok(out)
}

/// Describes the last increments of an unconverged run.
fn tail_note(diffs: &[f64]) -> String {
    let tail = &diffs[diffs.len().saturating_sub(10)..];
    let rises = tail.windows(2).filter(|w| w[1] > w[0]).count();
    let last = tail.last().copied().unwrap_or(f64::NAN);
    if rises >= tail.len() / 3 {
        format!("tail oscillates: {rises} increases in the last {} steps, last step {last:e}", tail.len())
    } else {
        format!("slow contraction: last step {last:e}")
    }
}
