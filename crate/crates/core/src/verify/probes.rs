use crate::error::{KirchhoffError, Result};
use crate::mesh::{self, DomainMesh, GridFunction};
use crate::problem::{MeshConstants, ProblemParams, Regime};
use crate::solvers::{self, descent_from, multi_start_with, SolveOutcome, SolverConfig};

/// Decay scan calibration: the last sup norm must fall to this fraction of
/// the first.
pub const DECAY_RATIO: f64 = 0.05;
/// Slack allowed on each step of the decreasing sup-norm table.
pub const MONOTONE_SLACK: f64 = 0.10;

/// `sup |(1 + b‖∇u‖^{2α})(−Δ_h u) − (u⁺)^p − λf|`.
pub fn residual_certificate(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &GridFunction,
) -> Result<f64> {
    solvers::residual_norm(mesh, params, u)
}

#[derive(Debug, Clone)]
pub struct UniquenessRecord {
    pub lambda: f64,
    /// Distinct positive solutions found by the multi-start search.
    pub count: usize,
    /// `C₂ + ‖∇u‖C₁` evaluated at the lowest-energy solution `u` (with
    /// both solutions of the estimate taken equal to `u`).
    pub contraction: Option<f64>,
    /// Whether the record falls under the uniqueness statement (`α ≥ ½`);
    /// smaller exponents are recorded but not judged.
    pub judged: bool,
    pub solutions: Vec<SolveOutcome>,
}

impl UniquenessRecord {
    /// One solution and a contraction quantity below one.
    pub fn is_unique(&self) -> bool {
        self.count == 1 && self.contraction.is_some_and(|c| c < 1.0)
    }
}

/// `C₂ + ‖∇u‖C₁` with `C₁ = 2αb(2‖∇u‖)^{2α−1}` and
/// `C₂ = p(2‖u‖∞)^{p−1}/λ₁`.
pub fn contraction_quantity(params: &ProblemParams, lambda1: f64, u: &SolveOutcome) -> f64 {
    let (a, b, p) = (params.alpha, params.b, params.p);
    let s = u.seminorm;
    let c1 = 2.0 * a * b * (2.0 * s).powf(2.0 * a - 1.0);
    let c2 = p / lambda1 * (2.0 * u.sup_norm()).powf(p - 1.0);
    c2 + s * c1
}

/// Counts distinct positive solutions per `λ` with a seeded multi-start
/// search and evaluates the contraction quantity at the lowest-energy one.
pub fn uniqueness_probe(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambdas: &[f64],
    config: &SolverConfig,
    n_starts: usize,
) -> Result<Vec<UniquenessRecord>> {
    let regime = params.regime()?;
    if regime != Regime::A {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::A,
            found: regime,
        });
    }
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let constants = MeshConstants::compute(mesh, params.p)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let pl = params.with_lambda(lambda);
            let solutions = multi_start_with(mesh, &pl, config, n_starts, &constants)?;
            let contraction = solutions
                .first()
                .map(|u| contraction_quantity(&pl, constants.lambda1, u));
            Ok(UniquenessRecord {
                lambda,
                count: solutions.len(),
                contraction,
                judged: params.alpha >= 0.5,
                solutions,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub lambda: f64,
    pub sup_norm: f64,
    pub seminorm: f64,
    /// `sup|u/λ − w|/sup|w|` with `w` the Poisson solution for `f`;
    /// absent at `λ = 0`.
    pub scaled_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DecayScan {
    pub rows: Vec<DecayRow>,
    /// The first `λ` at which the solver failed, which ends the scan.
    pub failure: Option<(f64, KirchhoffError)>,
    pub decay_ratio: f64,
    pub monotone_slack: f64,
}

impl DecayScan {
    /// Last over first sup norm among the positive-`λ` rows.
    pub fn ratio(&self) -> Option<f64> {
        let pos: Vec<&DecayRow> = self.rows.iter().filter(|r| r.lambda > 0.0).collect();
        match (pos.first(), pos.last()) {
            (Some(a), Some(b)) if pos.len() > 1 && a.sup_norm > 0.0 => Some(b.sup_norm / a.sup_norm),
            _ => None,
        }
    }

    /// Every step decreases up to the relative slack.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].sup_norm <= (1.0 + self.monotone_slack) * w[0].sup_norm)
    }

    pub fn decays(&self) -> bool {
        self.failure.is_none() && self.ratio().is_some_and(|r| r <= self.decay_ratio) && self.is_monotone()
    }
}

/// Solves along a decreasing `λ` sequence by descent, warm-starting each
/// solve from the previous solution scaled by the ratio of the `λ` values.
/// A solver failure ends the scan and is kept with the partial table.
pub fn supnorm_decay_scan(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<DecayScan> {
    let regime = params.regime()?;
    if regime != Regime::A {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::A,
            found: regime,
        });
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(KirchhoffError::InvalidParams(
            "decay scan needs a strictly decreasing nonnegative lambda sequence".into(),
        ));
    }
    let w = mesh::poisson_solve(mesh, &params.f)?;
    let w_sup = w.max_abs();
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut failure = None;
    let mut prev: Option<(f64, GridFunction)> = None;
    for &lambda in lambdas {
        let pl = params.with_lambda(lambda);
        let start = match &prev {
            Some((l0, u)) if *l0 > 0.0 => u.scaled(lambda / l0),
            _ => GridFunction::zeros(mesh),
        };
        let out = match &prev {
            Some(_) => descent_from(mesh, &pl, config, &start),
            None => solvers::descent_minimize(mesh, &pl, config),
        };
        match out {
            Ok(o) if o.converged => {
                let scaled_distance = (lambda > 0.0 && w_sup > 0.0)
                    .then(|| o.solution.scaled(1.0 / lambda).sup_distance(&w) / w_sup);
                rows.push(DecayRow {
                    lambda,
                    sup_norm: o.sup_norm(),
                    seminorm: o.seminorm,
                    scaled_distance,
                });
                prev = Some((lambda, o.solution));
            }
            Ok(o) => {
                failure = Some((
                    lambda,
                    KirchhoffError::NonConvergence {
                        iterations: o.iterations,
                        residual: o.residual,
                    },
                ));
                break;
            }
            Err(e) => {
                failure = Some((lambda, e));
                break;
            }
        }
    }
    Ok(DecayScan {
        rows,
        failure,
        decay_ratio: DECAY_RATIO,
        monotone_slack: MONOTONE_SLACK,
    })
}
