use super::{evaluate, finish, Evaluation, SolveOutcome, SolverConfig, SolverId};
use crate::energy;
use crate::error::{KirchhoffError, Result};
use crate::linalg;
use crate::mesh::{DomainMesh, GridFunction};
use crate::problem::{ProblemParams, Regime};
use crate::reduction;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

/// Energy descent started from the nonlocal linear solution (or from zero
/// when `λ = 0` or the forcing has no nonnegative witness).
pub fn descent_minimize(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let start = if params.lambda > 0.0 {
        match reduction::kirchhoff_linear_solve(mesh, params) {
            Ok(u) => u,
            Err(KirchhoffError::NotMember { .. }) => GridFunction::zeros(mesh),
            Err(e) => return Err(e),
        }
    } else {
        GridFunction::zeros(mesh)
    };
    descent_from(mesh, params, config, &start)
}

/// Gradient descent in the `H¹₀` metric with Armijo backtracking.
///
/// The unconstrained mode needs the coercive regime; the supercritical
/// regime is refused and the mountain-pass regime requires `config.rho0`,
/// in which case iterates are scaled back into `‖∇u‖ ≤ ρ₀`. Near a
/// minimizer, energy differences fall below roundoff; there the decrease
/// is measured by Simpson integration of the directional derivative along
/// the step instead.
pub fn descent_from(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    initial: &GridFunction,
) -> Result<SolveOutcome> {
    config.validate()?;
    mesh.check(initial)?;
    let radius = match (params.regime()?, config.rho0) {
        (Regime::A, r) => r,
        (Regime::B, Some(r)) => Some(r),
        (Regime::B, None) => {
            return Err(KirchhoffError::InvalidParams(
                "descent in the mountain-pass regime needs a ball radius".into(),
            ))
        }
        (found, _) => {
            return Err(KirchhoffError::RegimeMismatch {
                expected: Regime::A,
                found,
            })
        }
    };
    let w = mesh.weights();
    let project = |mut v: Vec<f64>| -> (Vec<f64>, bool) {
        if let Some(r) = radius {
            let s = linalg::dot(&v, &mesh.stiffness_apply(&v)).max(0.0).sqrt();
            if s > r {
                v.iter_mut().for_each(|x| *x *= r / s);
                return (v, true);
            }
        }
        (v, false)
    };
    let slope_along = |ev: &Evaluation, d: &[f64]| -> f64 {
        ev.grad
            .iter()
            .zip(d)
            .zip(w)
            .map(|((g, d), w)| g * d * w)
            .sum()
    };

    let (mut u, _) = project(initial.values().to_vec());
    let mut ev = evaluate(mesh, params, &u);
    let mut e = energy::breakdown(mesh, params, &u, ev.d);
    let mut history = vec![ev.residual];
    let mut tau_prev = 1.0 / (1.0 + params.b * ev.d.powf(params.alpha));
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        if ev.residual <= config.tol {
            break;
        }
        iterations += 1;
        let wg: Vec<f64> = ev.grad.iter().zip(w).map(|(g, w)| g * w).collect();
        let mut d = mesh.stiffness_solve(&wg)?;
        d.iter_mut().for_each(|x| *x = -*x);
        let slope = linalg::dot(&wg, &d);
        let cap = 1.0 / (1.0 + params.b * ev.d.powf(params.alpha));
        let mut tau = (2.0 * tau_prev).min(cap);
        let accepted = loop {
            let (trial, projected) =
                project(u.iter().zip(&d).map(|(x, d)| x + tau * d).collect());
            let tev = evaluate(mesh, params, &trial);
            let te = energy::breakdown(mesh, params, &trial, tev.d);
            let mut de = te.total - e.total;
            if !projected && de.abs() <= 1e-8 * (e.magnitude() + te.magnitude()) {
                let mid: Vec<f64> = u.iter().zip(&d).map(|(x, d)| x + 0.5 * tau * d).collect();
                let mev = evaluate(mesh, params, &mid);
                de = tau / 6.0
                    * (slope + 4.0 * slope_along(&mev, &d) + slope_along(&tev, &d));
            }
            if de.is_finite() && de <= ARMIJO * tau * slope {
                break Some((trial, tev, te));
            }
            tau *= 0.5;
            if tau < MIN_STEP {
                break None;
            }
        };
        match accepted {
            Some((trial, tev, te)) => {
                u = trial;
                ev = tev;
                e = te;
                tau_prev = tau;
                history.push(ev.residual);
            }
            None => {
                stalled = true;
                break;
            }
        }
    }

    let seminorm = ev.d.sqrt();
    if let Some(r) = radius {
        if seminorm >= r * (1.0 - 1e-9) {
            return Err(KirchhoffError::PinnedToBall {
                seminorm,
                radius: r,
            });
        }
    }
    if ev.residual > config.tol || stalled {
        return Err(KirchhoffError::NonConvergence {
            iterations,
            residual: ev.residual,
        });
    }
    finish(
        mesh,
        params,
        mesh.wrap(u),
        SolverId::Descent,
        iterations,
        history,
        config.tol,
    )
}
