use super::{evaluate, newton_nonlocal, PassGeometry, SolveOutcome, SolverConfig, SolverId};
use crate::energy;
use crate::error::{KirchhoffError, Result};
use crate::linalg;
use crate::mesh::DomainMesh;
use crate::problem::{MeshConstants, ProblemParams, Regime};

const REPARAM_EVERY: usize = 10;
/// Relaxation hands over to Newton once the projected gradient is this
/// small relative to the seminorm of the path maximum.
const HANDOVER: f64 = 1e-4;

/// Mountain-pass critical point between `0` and `t₀φ₁`.
///
/// Requires the mountain-pass regime and `λ < β_f`.
pub fn mountain_pass_search(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let regime = params.regime()?;
    if regime != Regime::B {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::B,
            found: regime,
        });
    }
    let constants = MeshConstants::compute(mesh, params.p)?;
    let geometry = super::step1_geometry(mesh, params, &constants)?;
    if params.lambda >= geometry.beta_f {
        return Err(KirchhoffError::Geometry(format!(
            "lambda = {} is not below beta_f = {}",
            params.lambda, geometry.beta_f
        )));
    }
    mountain_pass_with(mesh, params, config, &geometry)
}

/// Path relaxation with a precomputed geometry and no regime gate; the
/// polished critical point must carry energy at least `E₀`.
///
/// The path is a polyline of `config.path_nodes` fields. Each sweep moves
/// the highest interior node against the energy gradient (in the `H¹₀`
/// metric) with the component along the path removed, then the nodes are
/// periodically redistributed to equal seminorm arc length.
pub fn mountain_pass_with(
    mesh: &DomainMesh,
    params: &ProblemParams,
    config: &SolverConfig,
    geometry: &PassGeometry,
) -> Result<SolveOutcome> {
    config.validate()?;
    let k = config.path_nodes;
    let end = geometry.endpoint.values();
    let energy_of = |v: &[f64]| {
        let d = linalg::dot(v, &mesh.stiffness_apply(v)).max(0.0);
        energy::breakdown(mesh, params, v, d).total
    };
    let mut path: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let s = i as f64 / (k - 1) as f64;
            end.iter().map(|x| s * x).collect()
        })
        .collect();
    let mut heights: Vec<f64> = path.iter().map(|v| energy_of(v)).collect();
    let w = mesh.weights();

    let max_relax = 10 * config.max_iter;
    let mut relax = 0;
    let mut step = 1.0_f64;
    while relax < max_relax {
        relax += 1;
        let top = (1..k - 1)
            .max_by(|&a, &b| heights[a].total_cmp(&heights[b]))
            .expect("path has interior nodes");
        if !(heights[top] > 0.0) {
            return Err(KirchhoffError::PathCollapse {
                max_energy: heights[top],
            });
        }
        let u = &path[top];
        let ev = evaluate(mesh, params, u);
        let wg: Vec<f64> = ev.grad.iter().zip(w).map(|(g, w)| g * w).collect();
        let g = mesh.stiffness_solve(&wg)?;
        let tangent: Vec<f64> = path[top + 1]
            .iter()
            .zip(&path[top - 1])
            .map(|(a, b)| a - b)
            .collect();
        let kt = mesh.stiffness_apply(&tangent);
        let tt = linalg::dot(&tangent, &kt);
        let coef = if tt > 0.0 { linalg::dot(&g, &kt) / tt } else { 0.0 };
        let dir: Vec<f64> = g.iter().zip(&tangent).map(|(g, t)| g - coef * t).collect();
        let dir_norm2 = linalg::dot(&dir, &mesh.stiffness_apply(&dir)).max(0.0);
        if dir_norm2.sqrt() <= HANDOVER * ev.d.sqrt().max(1e-300) {
            break;
        }

        let cap = 1.0 / (1.0 + params.b * ev.d.powf(params.alpha));
        let mut s = (2.0 * step).min(cap);
        let moved = loop {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x - s * d).collect();
            let h = energy_of(&trial);
            if h < heights[top] - 1e-4 * s * dir_norm2 {
                break Some((trial, h));
            }
            s *= 0.5;
            if s < 1e-12 {
                break None;
            }
        };
        match moved {
            Some((trial, h)) => {
                path[top] = trial;
                heights[top] = h;
                step = s;
            }
            None => break,
        }
        if relax % REPARAM_EVERY == 0 {
            path = reparametrize(mesh, &path);
            heights = path.iter().map(|v| energy_of(v)).collect();
        }
    }

    let top = (1..k - 1)
        .max_by(|&a, &b| heights[a].total_cmp(&heights[b]))
        .expect("path has interior nodes");
    if !(heights[top] > 0.0) {
        return Err(KirchhoffError::PathCollapse {
            max_energy: heights[top],
        });
    }
    let mut out = newton_nonlocal(mesh, params, config, &mesh.wrap(path[top].clone()))?;
    if out.energy.total < geometry.e0 {
        return Err(KirchhoffError::BelowPassLevel {
            energy: out.energy.total,
            floor: geometry.e0,
        });
    }
    out.solver = SolverId::MountainPass;
    out.iterations += relax;
    Ok(out)
}

/// Resamples a polyline at equal arc length in the seminorm.
fn reparametrize(mesh: &DomainMesh, path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = path.len();
    let mut arc = vec![0.0];
    for pair in path.windows(2) {
        let diff: Vec<f64> = pair[1].iter().zip(&pair[0]).map(|(a, b)| a - b).collect();
        let len = linalg::dot(&diff, &mesh.stiffness_apply(&diff)).max(0.0).sqrt();
        arc.push(arc.last().unwrap() + len);
    }
    let total = *arc.last().unwrap();
    if total == 0.0 {
        return path.to_vec();
    }
    let mut out = Vec::with_capacity(k);
    let mut seg = 0;
    for i in 0..k {
        let target = total * i as f64 / (k - 1) as f64;
        while seg + 2 < k && arc[seg + 1] < target {
            seg += 1;
        }
        let span = arc[seg + 1] - arc[seg];
        let s = if span > 0.0 {
            ((target - arc[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(
            path[seg]
                .iter()
                .zip(&path[seg + 1])
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        );
    }
    // endpoints stay exact
    out[0] = path[0].clone();
    out[k - 1] = path[k - 1].clone();
    out
}
