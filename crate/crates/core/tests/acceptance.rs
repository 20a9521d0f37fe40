//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kirchhoff_core::continuation::{
    branch_csv, estimate_lambda_threshold, probe_solvability, sweep_b_threshold, BranchPoint,
    ThresholdOptions,
};
use kirchhoff_core::energy::{energy_eval, energy_gradient};
use kirchhoff_core::mesh::{
    h1_seminorm, laplacian_apply, poisson_solve, principal_eigenpair, dirichlet_form,
};
use kirchhoff_core::problem::compute_b0;
use kirchhoff_core::reduction::{kirchhoff_linear_solve, nonlocal_linear_residual, star_transform};
use kirchhoff_core::solvers::{
    build_barrier, descent_minimize, mountain_pass_search, picard_iterate_with, step1_geometry,
    Positivity, SolverConfig,
};
use kirchhoff_core::verify::{
    pohozaev_residual, shooting_solve_kirchhoff, supnorm_decay_scan, uniqueness_probe,
    PowerSource,
};
use kirchhoff_core::{
    build_mesh, DomainKind, DomainMesh, GridFunction, KirchhoffError, MeshConstants,
    ProblemParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: failures collected as messages, plus a CSV
/// body for the determinism check.
#[derive(Default)]
struct Verdict {
    failures: Vec<String>,
    notes: Vec<String>,
    csv: String,
}

impl Verdict {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn error(&mut self, context: &str, e: KirchhoffError) {
        self.failures.push(format!("{context}: {e}"));
    }
}

type Scenario = fn() -> Verdict;

fn interval(nodes: usize) -> DomainMesh {
    build_mesh(DomainKind::Interval { length: 1.0 }, nodes).unwrap()
}

fn ball(nodes: usize) -> DomainMesh {
    build_mesh(DomainKind::RadialBall { dim: 3, radius: 1.0 }, nodes).unwrap()
}

fn quartic(mesh: &DomainMesh) -> GridFunction {
    GridFunction::from_fn(mesh, |x| -2.0 + 12.0 * x[0] - 12.0 * x[0] * x[0])
}

fn mechanics() -> Verdict {
    let mut v = Verdict::default();
    let m = interval(5);
    let torsion = poisson_solve(&m, &GridFunction::constant(&m, 1.0)).unwrap();
    let exact = [0.09375, 0.125, 0.09375];
    let err = torsion
        .values()
        .iter()
        .zip(exact)
        .fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()));
    v.require(err <= 1e-15, format!("torsion nodal error {err:e}"));

    let semi2 = h1_seminorm(&m, &torsion).unwrap().powi(2);
    v.require((semi2 - 0.078125).abs() <= 1e-14, format!("seminorm² {semi2}"));

    for nodes in [5, 65] {
        let mesh = interval(nodes);
        let h = mesh.h();
        let (lam, phi) = principal_eigenpair(&mesh).unwrap();
        let closed = (2.0 - 2.0 * (std::f64::consts::PI * h).cos()) / (h * h);
        v.require(
            (lam - closed).abs() <= 1e-10 * closed,
            format!("λ₁ rel error {:e} at h = {h}", (lam - closed).abs() / closed),
        );
        let signs = phi.values().iter().all(|&x| x > 0.0) || phi.values().iter().all(|&x| x < 0.0);
        v.require(signs, format!("φ₁ single-signed at h = {h}"));
    }
    v
}

fn linear_equivalence() -> Verdict {
    let mut v = Verdict::default();
    let m = interval(129);
    for (name, f) in [("constant", GridFunction::constant(&m, 1.0)), ("quartic", quartic(&m))] {
        for (b, alpha, lambda) in [(1.0, 1.0, 0.5), (1.0, 0.5, 5.0), (3.0, 2.0, 50.0)] {
            let params = ProblemParams::new(&m, b, alpha, 2.0, lambda, f.clone()).unwrap();
            let u = match kirchhoff_linear_solve(&m, &params) {
                Ok(u) => u,
                Err(e) => {
                    v.error(name, e);
                    continue;
                }
            };
            let lf = f.scaled(lambda);
            let res = nonlocal_linear_residual(&m, b, alpha, &u, &lf).unwrap() / lf.max_abs();
            v.require(res <= 1e-10, format!("{name} λ = {lambda}: nonlocal residual {res:e}"));
            let t = dirichlet_form(&m, &u).unwrap().powf(alpha);
            let w = u.scaled((1.0 + b * t) / lambda);
            let poisson = laplacian_apply(&m, &w).unwrap().sup_distance(&f) / f.max_abs();
            v.require(poisson <= 1e-9, format!("{name} λ = {lambda}: Poisson residual {poisson:e}"));
        }
    }
    let minus = ProblemParams::new(&m, 1.0, 1.0, 2.0, 1.0, GridFunction::constant(&m, -1.0)).unwrap();
    v.require(
        matches!(kirchhoff_linear_solve(&m, &minus), Err(KirchhoffError::NotMember { .. })),
        "f ≡ −1 refused",
    );
    v
}

fn regime_a_existence() -> Verdict {
    let mut v = Verdict::default();
    let m = interval(513);
    let cfg = SolverConfig::default();
    let mut points = Vec::new();
    for (name, f) in [("constant", GridFunction::constant(&m, 1.0)), ("quartic", quartic(&m))] {
        for lambda in [0.1, 1.0, 10.0, 100.0] {
            let params = ProblemParams::new(&m, 1.0, 1.0, 2.0, lambda, f.clone()).unwrap();
            match descent_minimize(&m, &params, &cfg) {
                Ok(o) => {
                    v.require(
                        o.converged
                            && o.positivity == Positivity::StrictlyPositive
                            && o.energy.total < 0.0
                            && o.residual <= 1e-8,
                        format!(
                            "{name} λ = {lambda}: {}, E = {:e}, residual {:e}",
                            o.positivity, o.energy.total, o.residual
                        ),
                    );
                    points.push(BranchPoint::from_outcome(lambda, &o));
                }
                Err(e) => v.error(&format!("{name} λ = {lambda}"), e),
            }
        }
    }
    v.csv = branch_csv(&points);
    v
}

/// Regime A on the unit interval with `b = 2b₀`.
fn uniqueness_setup() -> (DomainMesh, ProblemParams) {
    let m = interval(129);
    let f = GridFunction::constant(&m, 1.0);
    let base = ProblemParams::new(&m, 1.0, 1.0, 2.0, 1e-3, f).unwrap();
    let constants = MeshConstants::compute(&m, 2.0).unwrap();
    let b0 = compute_b0(&base, constants.sobolev).unwrap();
    let params = base.with_b(2.0 * b0);
    (m, params)
}

fn uniqueness() -> Verdict {
    let mut v = Verdict::default();
    let (m, params) = uniqueness_setup();
    match uniqueness_probe(&m, &params, &[1e-3], &SolverConfig::default(), 8) {
        Ok(records) => {
            v.csv.push_str("lambda,count,contraction\n");
            for r in &records {
                let c = r.contraction.unwrap_or(f64::NAN);
                let _ = writeln!(v.csv, "{:.16e},{},{:.16e}", r.lambda, r.count, c);
                v.require(r.count == 1, format!("{} distinct positive solutions", r.count));
                v.require(c < 1.0, format!("contraction {c:e}"));
            }
        }
        Err(e) => v.error("probe", e),
    }
    v
}

fn decay() -> Verdict {
    let mut v = Verdict::default();
    let (m, params) = uniqueness_setup();
    let lambdas: Vec<f64> = (0..=10).map(|k| 0.5_f64.powi(k)).collect();
    match supnorm_decay_scan(&m, &params, &lambdas, &SolverConfig::default()) {
        Ok(scan) => {
            v.csv.push_str("lambda,sup_norm,seminorm,scaled_distance\n");
            for r in &scan.rows {
                let d = r.scaled_distance.unwrap_or(f64::NAN);
                let _ = writeln!(v.csv, "{:.16e},{:.16e},{:.16e},{:.16e}", r.lambda, r.sup_norm, r.seminorm, d);
            }
            if let Some((lambda, e)) = &scan.failure {
                v.failures.push(format!("scan stopped at λ = {lambda}: {e}"));
            }
            let ratio = scan.ratio().unwrap_or(f64::NAN);
            v.require(scan.is_monotone(), "sup norms decrease");
            v.require(ratio <= 0.05, format!("final/first {ratio:e}"));
            let last = scan.rows.last().and_then(|r| r.scaled_distance).unwrap_or(f64::NAN);
            v.require(last <= 0.05, format!("u/λ to witness {last:e}"));
        }
        Err(e) => v.error("scan", e),
    }
    v
}

fn multiplicity() -> Verdict {
    let mut v = Verdict::default();
    let m = ball(65);
    let f = GridFunction::constant(&m, 1.0);
    let params = ProblemParams::new(&m, 0.01, 1.0, 4.0, 0.05, f).unwrap();
    let cfg = SolverConfig::default();
    let constants = MeshConstants::compute(&m, 4.0).unwrap();
    let geometry = step1_geometry(&m, &params, &constants).unwrap();
    let local = SolverConfig {
        rho0: Some(geometry.rho0),
        ..cfg.clone()
    };
    let mut points = Vec::new();
    match (descent_minimize(&m, &params, &local), mountain_pass_search(&m, &params, &cfg)) {
        (Ok(a), Ok(b)) => {
            let positive = a.is_positive_solution() && b.is_positive_solution();
            v.require(positive, format!("positivity {} / {}", a.positivity, b.positivity));
            v.require(
                a.energy.total < 0.0 && b.energy.total > 0.0,
                format!("energies {:e} / {:e}", a.energy.total, b.energy.total),
            );
            let gap = a.solution.sup_distance(&b.solution);
            v.require(gap >= 1e-3, format!("sup distance {gap:e}"));
            points.push(BranchPoint::from_outcome(0.05, &a));
            points.push(BranchPoint::from_outcome(0.05, &b));
        }
        (a, b) => {
            if let Err(e) = a {
                v.error("descent", e);
            }
            if let Err(e) = b {
                v.error("mountain pass", e);
            }
        }
    }
    v.csv = branch_csv(&points);

    let options = ThresholdOptions::default();
    match estimate_lambda_threshold(&m, &params, &cfg, &options) {
        Ok(est) => {
            let ratio = est.ratio();
            v.require(
                est.upper.is_finite() && ratio <= 1.1,
                format!("bracket [{:.6e}, {:.6e}] ratio {ratio:.4}", est.lower, est.upper),
            );
            v.csv.push_str("lambda,solvable,rounds\n");
            for vote in &est.votes {
                let _ = writeln!(v.csv, "{:.16e},{},{}", vote.lambda, vote.solvable, vote.rounds);
            }
            for factor in [1.05, 1.5, 3.0] {
                let lambda = est.upper * factor;
                match probe_solvability(&m, &params.with_lambda(lambda), &cfg, &constants, None, 8, 2) {
                    Ok((vote, _)) => v.require(
                        !vote.solvable,
                        format!("nothing at {factor}×upper ({} rounds)", vote.rounds),
                    ),
                    Err(e) => v.error(&format!("probe at {factor}×upper"), e),
                }
            }
        }
        Err(e) => v.error("threshold", e),
    }
    v
}

fn supercritical() -> Verdict {
    let mut v = Verdict::default();
    let cfg = SolverConfig::default();
    let mut relatives = Vec::new();
    v.csv.push_str("nodes,sup_norm,shooting_relative,pohozaev_relative\n");
    for nodes in [65, 129] {
        let m = ball(nodes);
        let h = m.h();
        let f = GridFunction::constant(&m, 1.0);
        let params = ProblemParams::new(&m, 1.0, 0.5, 6.0, 0.01, f).unwrap();
        let barrier = build_barrier(&m, &params).unwrap();
        // any iterate leaving [0, ψ₀] aborts the iteration with an error
        let out = match picard_iterate_with(&m, &params, &cfg, Some(&barrier)) {
            Ok(o) => o,
            Err(e) => {
                v.error(&format!("picard h = {h}"), e);
                continue;
            }
        };
        v.require(
            out.converged && out.positivity == Positivity::StrictlyPositive,
            format!("picard h = {h}: residual {:e}, {}", out.residual, out.positivity),
        );
        let shoot = shooting_solve_kirchhoff(&m, 1.0, 0.5, |_, u: f64| u.max(0.0).powi(6) + 0.01);
        let rel = match shoot {
            Ok(s) => s.profile.sup_distance(&out.solution) / out.sup_norm(),
            Err(e) => {
                v.error(&format!("shooting h = {h}"), e);
                f64::NAN
            }
        };
        v.require(rel <= 0.01, format!("shooting sup-relative {rel:e} at h = {h}"));
        let (w, kappa) = star_transform(&m, &params, &out.solution).unwrap();
        let poh = pohozaev_residual(&m, &PowerSource::constant(&m, kappa, 6.0, 1.0), &w).unwrap();
        v.require(
            poh.relative <= 5.0 * h,
            format!("Pohozaev relative {:e} at h = {h}", poh.relative),
        );
        relatives.push(poh.relative);
        let _ = writeln!(
            v.csv,
            "{nodes},{:.16e},{:.16e},{:.16e}",
            out.sup_norm(),
            rel,
            poh.relative
        );
    }
    if let [coarse, fine] = relatives[..] {
        let ratio = coarse / fine;
        v.require(ratio >= 1.5, format!("Pohozaev reduction under halving {ratio:.2}"));
    }
    v
}

fn b0_threshold() -> Verdict {
    let mut v = Verdict::default();
    let m = interval(129);
    let f = GridFunction::constant(&m, 1.0);
    let params = ProblemParams::new(&m, 1.0, 1.0, 2.0, 0.0, f).unwrap();
    let constants = MeshConstants::compute(&m, 2.0).unwrap();
    let b0 = compute_b0(&params, constants.sobolev).unwrap();
    match sweep_b_threshold(&m, &params, &[10.0 * b0, 0.01 * b0], &SolverConfig::default()) {
        Ok(scan) => {
            v.csv.push_str("b,grid_found,shooting_found,residual\n");
            for r in &scan.records {
                let _ = writeln!(
                    v.csv,
                    "{:.16e},{},{},{:.16e}",
                    r.b,
                    r.grid_found,
                    r.shooting_found,
                    r.residual.unwrap_or(f64::NAN)
                );
            }
            let (high, low) = (&scan.records[0], &scan.records[1]);
            v.require(
                !high.grid_found && !high.shooting_found,
                format!("10b₀: grid {}, shooting {}", high.grid_found, high.shooting_found),
            );
            let res = low.residual.unwrap_or(f64::NAN);
            v.require(
                low.found() && res <= 1e-8,
                format!("0.01b₀: found {}, residual {res:e}", low.found()),
            );
        }
        Err(e) => v.error("scan", e),
    }
    v
}

fn gradient_fidelity() -> Verdict {
    let mut v = Verdict::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let meshes = [interval(65), ball(33)];
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let m = &meshes[k % 2];
        let f = GridFunction::from_fn(m, |x| 1.0 + x[0]);
        let params = ProblemParams::new(m, 0.5, 1.0, 3.0, 0.7, f).unwrap();
        // nodal magnitudes stay ≥ 0.1 so the ±ε probes never cross u = 0
        let nodal: Vec<f64> = (0..m.len())
            .map(|_| {
                let s = if rng.gen_bool(0.7) { 1.0 } else { -1.0 };
                s * rng.gen_range(0.1..1.0)
            })
            .collect();
        let u = GridFunction::from_values(m, nodal).unwrap();
        let dir = GridFunction::from_values(m, (0..m.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let g = energy_gradient(m, &params, &u).unwrap();
        let analytic: f64 = g
            .values()
            .iter()
            .zip(dir.values())
            .zip(m.weights())
            .map(|((a, d), w)| a * d * w)
            .sum();
        let eps = 1e-5;
        let e = |s: f64| energy_eval(m, &params, &u.add_scaled(s, &dir)).unwrap().total;
        let fd = (e(eps) - e(-eps)) / (2.0 * eps);
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-300);
        worst = worst.max(rel);
    }
    v.require(worst <= 1e-6, format!("worst relative mismatch {worst:e}"));
    v
}

struct Criterion {
    number: usize,
    name: &'static str,
    budget: Duration,
    run: Scenario,
    deterministic: bool,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { number: 1, name: "mechanics floor", budget: Duration::from_secs(1), run: mechanics, deterministic: false },
        Criterion { number: 2, name: "linear equivalence", budget: Duration::from_secs(1), run: linear_equivalence, deterministic: false },
        Criterion { number: 3, name: "regime A existence", budget: Duration::from_secs(30), run: regime_a_existence, deterministic: true },
        Criterion { number: 4, name: "uniqueness", budget: Duration::from_secs(60), run: uniqueness, deterministic: true },
        Criterion { number: 5, name: "decay", budget: Duration::from_secs(60), run: decay, deterministic: true },
        Criterion { number: 6, name: "multiplicity and threshold", budget: Duration::from_secs(600), run: multiplicity, deterministic: true },
        Criterion { number: 7, name: "supercritical barrier", budget: Duration::from_secs(300), run: supercritical, deterministic: true },
        Criterion { number: 8, name: "b0 threshold", budget: Duration::from_secs(120), run: b0_threshold, deterministic: true },
        Criterion { number: 9, name: "gradient fidelity", budget: Duration::from_secs(10), run: gradient_fidelity, deterministic: false },
    ];

    let mut all_pass = true;
    let mut report = |number: usize, name: &str, failures: &[String], notes: &[String], elapsed: Duration| {
        let pass = failures.is_empty();
        all_pass &= pass;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let detail = if pass { notes.join("; ") } else { failures.join("; ") };
        println!("criterion {number} ({name}): {verdict} [{elapsed:.2?}] {detail}");
    };

    let mut bodies = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let mut verdict = (c.run)();
        let elapsed = start.elapsed();
        if elapsed > c.budget {
            verdict.failures.push(format!("runtime {elapsed:.2?} over budget {:?}", c.budget));
        }
        report(c.number, c.name, &verdict.failures, &verdict.notes, elapsed);
        if c.deterministic {
            bodies.push((c.number, verdict.csv));
        }
    }

    let start = Instant::now();
    let mut failures = Vec::new();
    for (c, first) in criteria.iter().filter(|c| c.deterministic).zip(&bodies) {
        let again = (c.run)().csv;
        if first.1.is_empty() {
            failures.push(format!("criterion {} produced no CSV", c.number));
        } else if again != first.1 {
            failures.push(format!("criterion {} CSV differs between runs", c.number));
        }
    }
    let notes = vec![format!("{} CSV bodies byte-identical", bodies.len())];
    report(10, "determinism", &failures, &notes, start.elapsed());

    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
