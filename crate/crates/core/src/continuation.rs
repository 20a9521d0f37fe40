//! Parameter sweeps in `λ` and `b`, the empirical solvability threshold in
//! `λ`, and the CSV form of branch data.
//!
//! "Unsolvable" here always means that every solver failed from every start
//! tried; it is evidence, never a certificate.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;

use crate::error::{KirchhoffError, Result};
use crate::mesh::{DomainMesh, GridFunction};
use crate::problem::{self, membership_m, MeshConstants, ProblemParams, Regime};
use crate::solvers::{
    descent_from, descent_minimize, mountain_pass_with, multi_start_with, newton_nonlocal,
    picard_iterate, step1_geometry, PassGeometry, Positivity, SolveOutcome, SolverConfig, SolverId,
};
use crate::verify::shooting_solve_kirchhoff;

/// Solutions closer than this (relative to `1 + sup|u|`) count as one.
const SAME_SOLUTION: f64 = 1e-6;
/// A seminorm jump this many times the previous increment flags a fold.
const FOLD_JUMP: f64 = 10.0;
/// Sup norm below which a converged solution of the homogeneous problem is
/// taken to be the trivial one.
pub const NONTRIVIAL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub solver: SolverId,
    pub converged: bool,
    /// Absent for failed points, which carry no field.
    pub positivity: Option<Positivity>,
    pub seminorm: f64,
    pub sup_norm: f64,
    pub energy: f64,
    pub residual: f64,
    /// Warm-started Newton lost this branch and the nearest re-found
    /// solution jumped in seminorm.
    pub fold_candidate: bool,
    /// Sup distance to the nearest solution at the previous `λ` divided by
    /// the `λ` step (warm sweeps only).
    pub drift: Option<f64>,
    pub solution: Option<GridFunction>,
}

impl BranchPoint {
    pub fn from_outcome(lambda: f64, o: &SolveOutcome) -> Self {
        BranchPoint {
            lambda,
            solver: o.solver,
            converged: o.converged,
            positivity: Some(o.positivity),
            seminorm: o.seminorm,
            sup_norm: o.sup_norm(),
            energy: o.energy.total,
            residual: o.residual,
            fold_candidate: false,
            drift: None,
            solution: Some(o.solution.clone()),
        }
    }

    pub fn failed(lambda: f64, solver: SolverId) -> Self {
        BranchPoint {
            lambda,
            solver,
            converged: false,
            positivity: None,
            seminorm: f64::NAN,
            sup_norm: f64::NAN,
            energy: f64::NAN,
            residual: f64::NAN,
            fold_candidate: false,
            drift: None,
            solution: None,
        }
    }

    pub fn is_positive_solution(&self) -> bool {
        self.converged && self.positivity == Some(Positivity::StrictlyPositive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Each `λ` starts from the solutions found at the previous one.
    Warm,
    /// Independent solves, evaluated in parallel.
    Cold,
}

/// Solver context shared across a sweep.
struct Context {
    regime: Regime,
    geometry: Option<PassGeometry>,
}

impl Context {
    fn new(mesh: &DomainMesh, params: &ProblemParams, constants: Option<&MeshConstants>) -> Result<Self> {
        let regime = params.regime()?;
        let geometry = match (regime, constants) {
            (Regime::B, Some(c)) => step1_geometry(mesh, params, c).ok(),
            _ => None,
        };
        Ok(Context { regime, geometry })
    }

    fn descent_config(&self, config: &SolverConfig) -> Option<SolverConfig> {
        match (self.regime, &self.geometry) {
            (Regime::A, _) => Some(config.clone()),
            (Regime::B, Some(g)) => Some(SolverConfig {
                rho0: Some(config.rho0.unwrap_or(g.rho0)),
                ..config.clone()
            }),
            _ => None,
        }
    }
}

struct PointResult {
    distinct: Vec<SolveOutcome>,
    /// Whether warm-started Newton converged from each previous solution.
    warm_ok: Vec<bool>,
    first_solver: SolverId,
}

fn solve_point(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    ctx: &Context,
    warm: &[GridFunction],
) -> PointResult {
    let mut found: Vec<SolveOutcome> = Vec::new();
    let mut first_solver = None;
    let mut attempt = |id: SolverId, r: Result<SolveOutcome>| {
        first_solver.get_or_insert(id);
        if let Ok(o) = r {
            if o.converged {
                found.push(o);
            }
        }
    };

    if let Some(cfg) = ctx.descent_config(config) {
        let r = match warm.first() {
            Some(u0) => descent_from(mesh, params, &cfg, u0),
            None => descent_minimize(mesh, params, &cfg),
        };
        attempt(SolverId::Descent, r);
    }
    attempt(SolverId::Picard, picard_iterate(mesh, params, config));
    if let Some(g) = &ctx.geometry {
        attempt(SolverId::MountainPass, mountain_pass_with(mesh, params, config, g));
    }
    let mut warm_ok = Vec::with_capacity(warm.len());
    for u0 in warm {
        let r = newton_nonlocal(mesh, params, config, u0);
        warm_ok.push(matches!(&r, Ok(o) if o.converged));
        attempt(SolverId::Newton, r);
    }
    PointResult {
        distinct: distinct_outcomes(found),
        warm_ok,
        first_solver: first_solver.unwrap_or(SolverId::Newton),
    }
}

/// Converged outcomes with near-duplicates removed (the first solver to
/// reach a solution keeps it), ordered by energy.
fn distinct_outcomes(outcomes: Vec<SolveOutcome>) -> Vec<SolveOutcome> {
    let mut kept: Vec<SolveOutcome> = Vec::new();
    for o in outcomes {
        let radius = SAME_SOLUTION * (1.0 + o.sup_norm());
        if kept.iter().all(|k| k.solution.sup_distance(&o.solution) > radius) {
            kept.push(o);
        }
    }
    kept.sort_by(|a, b| a.energy.total.total_cmp(&b.energy.total));
    kept
}

/// Natural continuation in `λ` over an ascending grid.
///
/// At each `λ` the sweep runs descent (coercive regime, or inside the
/// Step-1 ball in the mountain-pass regime), Picard, the mountain-pass
/// search (mountain-pass regime) and, in warm mode, Newton from every
/// solution of the previous grid point. All distinct converged outcomes
/// are recorded; a grid point without any becomes one failed point.
pub fn sweep_lambda(
    mesh: &DomainMesh,
    params: &ProblemParams,
    lambdas: &[f64],
    config: &SolverConfig,
    mode: SweepMode,
) -> Result<Vec<BranchPoint>> {
    config.validate()?;
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(KirchhoffError::InvalidParams(
            "lambda grid must be finite and nonnegative".into(),
        ));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KirchhoffError::InvalidParams(
            "lambda grid must be strictly ascending".into(),
        ));
    }
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let constants = match params.regime()? {
        Regime::B => Some(MeshConstants::compute(mesh, params.p)?),
        _ => None,
    };
    let ctx = Context::new(mesh, params, constants.as_ref())?;

    let points = |lambda: f64, r: &PointResult| -> Vec<BranchPoint> {
        if r.distinct.is_empty() {
            vec![BranchPoint::failed(lambda, r.first_solver)]
        } else {
            r.distinct
                .iter()
                .map(|o| BranchPoint::from_outcome(lambda, o))
                .collect()
        }
    };

    match mode {
        SweepMode::Cold => Ok(lambdas
            .par_iter()
            .map(|&l| points(l, &solve_point(mesh, &params.with_lambda(l), config, &ctx, &[])))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()),
        SweepMode::Warm => {
            let mut out = Vec::new();
            // previous solutions with their seminorm increments
            let mut prev: Vec<(SolveOutcome, Option<f64>)> = Vec::new();
            let mut prev_lambda = 0.0;
            for &lambda in lambdas {
                let warm: Vec<GridFunction> = prev.iter().map(|(o, _)| o.solution.clone()).collect();
                let r = solve_point(mesh, &params.with_lambda(lambda), config, &ctx, &warm);
                let mut pts = points(lambda, &r);
                let dl = lambda - prev_lambda;

                let mut next_prev = Vec::with_capacity(r.distinct.len());
                for (j, o) in r.distinct.iter().enumerate() {
                    let nearest = prev.iter().min_by(|a, b| {
                        a.0.solution
                            .sup_distance(&o.solution)
                            .total_cmp(&b.0.solution.sup_distance(&o.solution))
                    });
                    let incr = nearest.map(|(p, _)| (o.seminorm - p.seminorm).abs());
                    if let Some((p, _)) = nearest {
                        if dl > 0.0 {
                            pts[j].drift = Some(p.solution.sup_distance(&o.solution) / dl);
                        }
                    }
                    next_prev.push((o.clone(), incr));
                }
                for (i, ok) in r.warm_ok.iter().enumerate() {
                    if *ok || r.distinct.is_empty() {
                        continue;
                    }
                    let (lost, last_incr) = &prev[i];
                    let Some(last_incr) = last_incr else { continue };
                    let (j, jump) = r
                        .distinct
                        .iter()
                        .map(|o| (o.seminorm - lost.seminorm).abs())
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("nonempty");
                    if jump > FOLD_JUMP * last_incr {
                        pts[j].fold_candidate = true;
                    }
                }
                out.extend(pts);
                prev = next_prev;
                prev_lambda = lambda;
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVote {
    pub lambda: f64,
    pub solvable: bool,
    /// Rounds run (a failing `λ` needs every round to fail).
    pub rounds: usize,
    /// Solvers that reached a positive solution.
    pub successes: Vec<SolverId>,
}

#[derive(Debug, Clone)]
pub struct ThresholdEstimate {
    /// Largest `λ` with a positive solution found.
    pub lower: f64,
    /// Smallest `λ` at which every solver failed from every start.
    pub upper: f64,
    pub votes: Vec<ThresholdVote>,
    /// Largest seminorm among the solutions found.
    pub max_seminorm: f64,
}

impl ThresholdEstimate {
    pub fn ratio(&self) -> f64 {
        self.upper / self.lower
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOptions {
    /// First `λ` probed; defaults to the problem's own `λ` when positive.
    pub lambda_start: Option<f64>,
    pub lambda_max: f64,
    pub n_starts: usize,
    pub repeats: usize,
    /// Bisection stops once `upper/lower` is at most this.
    pub ratio: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            lambda_start: None,
            lambda_max: 1e4,
            n_starts: 8,
            repeats: 2,
            ratio: 1.1,
        }
    }
}

/// Searches for a positive solution at one `λ`: warm-started Newton, then
/// a seeded multi-start round (which also runs Picard and descent), with a
/// fresh seed for each repeat. Returns the vote and the lowest-energy
/// solution found.
pub fn probe_solvability(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    constants: &MeshConstants,
    warm: Option<&GridFunction>,
    n_starts: usize,
    repeats: usize,
) -> Result<(ThresholdVote, Option<SolveOutcome>)> {
    let mut successes = Vec::new();
    let mut best: Option<SolveOutcome> = None;
    let mut rounds = 0;
    for r in 0..repeats.max(1) {
        rounds += 1;
        let round_config = SolverConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let mut found: Vec<SolveOutcome> = Vec::new();
        if let Some(u0) = warm {
            if let Ok(o) = newton_nonlocal(mesh, params, &round_config, u0) {
                if o.is_positive_solution() {
                    found.push(o);
                }
            }
        }
        found.extend(multi_start_with(mesh, params, &round_config, n_starts, constants)?);
        if !found.is_empty() {
            for o in &found {
                if !successes.contains(&o.solver) {
                    successes.push(o.solver);
                }
            }
            best = found
                .into_iter()
                .min_by(|a, b| a.energy.total.total_cmp(&b.energy.total));
            break;
        }
    }
    Ok((
        ThresholdVote {
            lambda: params.lambda,
            solvable: best.is_some(),
            rounds,
            successes,
        },
        best,
    ))
}

/// Brackets the largest `λ` with a positive solution: doubling until a
/// failure, then geometric bisection until `upper/lower ≤ ratio`.
///
/// Refused in the coercive regime, where every `λ` is solvable, and for
/// forcings outside the class `M`.
pub fn estimate_lambda_threshold(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    options: &ThresholdOptions,
) -> Result<ThresholdEstimate> {
    config.validate()?;
    let regime = params.regime()?;
    if regime == Regime::A {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::B,
            found: regime,
        });
    }
    if let problem::Membership::NonMember { node, value, .. } = membership_m(mesh, &params.f)? {
        return Err(KirchhoffError::NotMember { node, value });
    }
    if !(options.ratio > 1.0 && options.lambda_max > 0.0) {
        return Err(KirchhoffError::InvalidParams(
            "threshold search needs ratio > 1 and lambda_max > 0".into(),
        ));
    }
    let constants = MeshConstants::compute(mesh, params.p)?;
    let mut votes = Vec::new();
    let mut max_seminorm: f64 = 0.0;
    let mut vote = |lambda: f64, warm: Option<&GridFunction>| -> Result<Option<SolveOutcome>> {
        let (v, best) = probe_solvability(
            mesh,
            &params.with_lambda(lambda),
            config,
            &constants,
            warm,
            options.n_starts,
            options.repeats,
        )?;
        votes.push(v);
        if let Some(o) = &best {
            max_seminorm = max_seminorm.max(o.seminorm);
        }
        Ok(best)
    };

    let start = options
        .lambda_start
        .or((params.lambda > 0.0).then_some(params.lambda))
        .unwrap_or(0.01);
    let (mut lo, mut lo_sol, mut hi);
    match vote(start, None)? {
        Some(sol) => {
            lo = start;
            lo_sol = sol.solution;
            loop {
                let next = 2.0 * lo;
                if next > options.lambda_max {
                    return Err(KirchhoffError::OpenUpperBracket {
                        lower: lo,
                        lambda_max: options.lambda_max,
                    });
                }
                match vote(next, Some(&lo_sol))? {
                    Some(sol) => {
                        lo = next;
                        lo_sol = sol.solution;
                    }
                    None => {
                        hi = next;
                        break;
                    }
                }
            }
        }
        None => {
            hi = start;
            let mut lambda = start;
            let mut found = None;
            for _ in 0..60 {
                lambda *= 0.5;
                if let Some(sol) = vote(lambda, None)? {
                    found = Some((lambda, sol.solution));
                    break;
                }
                hi = lambda;
            }
            let Some((l, s)) = found else {
                return Err(KirchhoffError::NoSolvableLambda { lowest: lambda });
            };
            lo = l;
            lo_sol = s;
        }
    }
    while hi / lo > options.ratio {
        let mid = (lo * hi).sqrt();
        match vote(mid, Some(&lo_sol))? {
            Some(sol) => {
                lo = mid;
                lo_sol = sol.solution;
            }
            None => hi = mid,
        }
    }
    Ok(ThresholdEstimate {
        lower: lo,
        upper: hi,
        votes,
        max_seminorm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BThresholdRecord {
    pub b: f64,
    /// Newton from a ladder of multiples of `φ₁` found a nontrivial
    /// positive solution.
    pub grid_found: bool,
    /// The shooting oracle's nonlocal fixed point exists.
    pub shooting_found: bool,
    /// Residual of the best grid solution, if any.
    pub residual: Option<f64>,
    pub sup_norm: Option<f64>,
}

impl BThresholdRecord {
    pub fn found(&self) -> bool {
        self.grid_found || self.shooting_found
    }
}

#[derive(Debug, Clone)]
pub struct BThresholdScan {
    /// The explicit threshold from the discrete Sobolev constant.
    pub b0: f64,
    pub records: Vec<BThresholdRecord>,
}

/// Amplitudes `2^k` of the `φ₁` starts in the homogeneous probe.
const AMPLITUDE_EXPONENTS: std::ops::RangeInclusive<i32> = -2..=24;

/// Looks for nontrivial positive solutions of the homogeneous problem
/// (`λ = 0`, coercive regime) at each `b`, by Newton from multiples of `φ₁`
/// and by the shooting oracle (polished by Newton on the grid).
pub fn sweep_b_threshold(
    mesh: &DomainMesh,
    params: &ProblemParams,
    bs: &[f64],
    config: &SolverConfig,
) -> Result<BThresholdScan> {
    config.validate()?;
    let regime = params.regime()?;
    if regime != Regime::A {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::A,
            found: regime,
        });
    }
    if params.lambda != 0.0 {
        return Err(KirchhoffError::InvalidParams(format!(
            "the homogeneous probe needs lambda = 0, got {}",
            params.lambda
        )));
    }
    let constants = MeshConstants::compute(mesh, params.p)?;
    let b0 = problem::compute_b0(params, constants.sobolev)?;
    let nontrivial = |o: &SolveOutcome| o.is_positive_solution() && o.sup_norm() > NONTRIVIAL;
    let p = params.p;

    let records = bs
        .iter()
        .map(|&b| {
            let pb = params.with_b(b);
            let mut best: Option<SolveOutcome> = None;
            let mut keep = |o: SolveOutcome| {
                if best.as_ref().is_none_or(|k| o.residual < k.residual) {
                    best = Some(o);
                }
            };
            let mut grid_found = false;
            for k in AMPLITUDE_EXPONENTS {
                let u0 = constants.phi1.scaled(2f64.powi(k));
                if let Ok(o) = newton_nonlocal(mesh, &pb, config, &u0) {
                    if nontrivial(&o) {
                        grid_found = true;
                        keep(o);
                    }
                }
            }
            let shooting = shooting_solve_kirchhoff(mesh, b, params.alpha, |_, u: f64| {
                u.max(0.0).powf(p)
            });
            let shooting_found = match shooting {
                Ok(s) if s.center_value > NONTRIVIAL => {
                    if let Ok(o) = newton_nonlocal(mesh, &pb, config, &s.profile) {
                        if nontrivial(&o) {
                            keep(o);
                        }
                    }
                    true
                }
                _ => false,
            };
            BThresholdRecord {
                b,
                grid_found,
                shooting_found,
                residual: best.as_ref().map(|o| o.residual),
                sup_norm: best.as_ref().map(|o| o.sup_norm()),
            }
        })
        .collect();
    Ok(BThresholdScan { b0, records })
}

/// Header of the branch table.
pub const BRANCH_CSV_HEADER: &str =
    "lambda,solver,converged,positivity,seminorm,sup_norm,energy_total,residual";

/// Floats with 17 significant digits.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// The branch table as CSV text, header included.
pub fn branch_csv(points: &[BranchPoint]) -> String {
    let mut s = String::from(BRANCH_CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            sci(p.lambda),
            p.solver,
            p.converged,
            p.positivity.map_or("none", |q| q.as_str()),
            sci(p.seminorm),
            sci(p.sup_norm),
            sci(p.energy),
            sci(p.residual),
        );
    }
    s
}

pub fn write_branch_csv<W: io::Write>(mut w: W, points: &[BranchPoint]) -> io::Result<()> {
    w.write_all(branch_csv(points).as_bytes())
}
