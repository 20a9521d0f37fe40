use super::{evaluate, finish, SolveOutcome, SolverConfig, SolverId};
use crate::error::{KirchhoffError, Result};
use crate::linalg;
use crate::mesh::{DomainMesh, GridFunction};
use crate::problem::ProblemParams;

const MIN_STEP: f64 = 1.0 / 1024.0;
const ARMIJO: f64 = 1e-4;

/// Damped Newton on `F(u) = (1 + b D^α)(−Δ_h u) − (u⁺)^p − λf`, `D = uᵀKu`.
///
/// The Jacobian is the banded base operator
/// `(1 + b D^α)(−Δ_h) − diag(p (u⁺)^{p−1})` plus the rank-one term
/// `2αb D^{α−1} (−Δ_h u)(K u)ᵀ`, inverted by Sherman–Morrison. Steps are
/// backtracked on `½‖F‖²` in the quadrature norm.
pub fn newton_nonlocal(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    initial: &GridFunction,
) -> Result<SolveOutcome> {
    config.validate()?;
    mesh.check(initial)?;
    let w = mesh.weights();
    let merit = |g: &[f64]| 0.5 * g.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>();

    let mut u = initial.values().to_vec();
    let mut ev = evaluate(mesh, params, &u);
    let mut history = vec![ev.residual];
    for it in 0..config.max_iter {
        if ev.residual <= config.tol {
            return finish(mesh, params, mesh.wrap(u), SolverId::Newton, it, history, config.tol);
        }
        if !ev.residual.is_finite() {
            break;
        }
        let (a, b, p) = (params.alpha, params.b, params.p);
        let shift: Vec<f64> = u.iter().map(|&v| p * v.max(0.0).powf(p - 1.0)).collect();
        let mut band = mesh.operator_band(1.0 + b * ev.d.powf(a), &shift);
        band.factor()?;
        let neg: Vec<f64> = ev.grad.iter().map(|g| -g).collect();
        let mut step = band.solve(&neg);
        if ev.d > 0.0 {
            let s = 2.0 * a * b * ev.d.powf(a - 1.0);
            let au: Vec<f64> = ev.ku.iter().zip(w).map(|(k, w)| s * k / w).collect();
            let y = band.solve(&au);
            let cy = linalg::dot(&ev.ku, &y);
            let denom = 1.0 + cy;
            if denom.abs() <= 1e-13 * (1.0 + cy.abs()) {
                return Err(KirchhoffError::SingularOperator);
            }
            let factor = linalg::dot(&ev.ku, &step) / denom;
            step.iter_mut().zip(&y).for_each(|(z, y)| *z -= factor * y);
        }

        let phi0 = merit(&ev.grad);
        let mut t = config.damping;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(x, d)| x + t * d).collect();
            let tev = evaluate(mesh, params, &trial);
            let phi = merit(&tev.grad);
            if phi.is_finite() && phi <= (1.0 - 2.0 * ARMIJO * t) * phi0 {
                u = trial;
                ev = tev;
                break;
            }
            t *= 0.5;
            if t < MIN_STEP {
                return Err(KirchhoffError::LineSearch {
                    residual: ev.residual,
                });
            }
        }
        history.push(ev.residual);
    }
    if ev.residual <= config.tol {
        return finish(
            mesh,
            params,
            mesh.wrap(u),
            SolverId::Newton,
            config.max_iter,
            history,
            config.tol,
        );
    }
    Err(KirchhoffError::NonConvergence {
        iterations: config.max_iter,
        residual: ev.residual,
    })
}
