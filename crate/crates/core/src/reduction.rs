//! Reductions of the nonlocal coefficient to one scalar equation.
//!
//! If `−Δ_h w = g` then `u = w/(1 + b y^α)` solves
//! `(1 + b‖∇u‖^{2α})(−Δ_h u) = g` exactly when `y = ‖∇u‖²` is the root of
//! `h(y) = b y^{α+½} + y^{½} − ‖∇w‖`.

use crate::error::{KirchhoffError, Result};
use crate::mesh::{self, DomainMesh, GridFunction};
use crate::problem::{self, Membership, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootProblem {
    pub b: f64,
    pub alpha: f64,
    pub c: f64,
}

impl RootProblem {
    pub fn h(&self, y: f64) -> f64 {
        self.b * y.powf(self.alpha + 0.5) + y.sqrt() - self.c
    }
}

/// Unique root `y ≥ 0` of `b y^{α+½} + y^{½} = c`.
///
/// Works in `s = √y`, where the map `b s^{2α+1} + s` is increasing and
/// convex enough for a safeguarded Newton step inside a bisection bracket.
pub fn solve_h_root(rp: RootProblem) -> f64 {
    let RootProblem { b, alpha, c } = rp;
    assert!(c >= 0.0 && b > 0.0 && alpha > 0.0, "invalid root problem {rp:?}");
    if c == 0.0 {
        return 0.0;
    }
    let tol = 1e-13 * c.max(1.0);
    let k = 2.0 * alpha + 1.0;
    let g = |s: f64| b * s.powf(k) + s - c;
    let dg = |s: f64| b * k * s.powf(k - 1.0) + 1.0;

    let y_hi = 1.0_f64.max((c / b).powf(1.0 / (alpha + 0.5))).max(c * c);
    let (mut lo, mut hi) = (0.0_f64, y_hi.sqrt());
    // both s ≤ c and s ≤ (c/b)^{1/k} hold at the root
    hi = hi.min(c).min((c / b).powf(1.0 / k)).max(f64::MIN_POSITIVE);
    let mut s = 0.5 * (lo + hi);
    for _ in 0..300 {
        let v = g(s);
        if v.abs() <= tol {
            break;
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - v / dg(s);
        s = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    s * s
}

/// Solves `(1 + b‖∇u‖^{2α})(−Δ_h u) = λf` by scaling the Poisson witness.
pub fn kirchhoff_linear_solve(mesh: &DomainMesh, params: &ProblemParams) -> Result<GridFunction> {
    if !(params.lambda > 0.0) {
        return Err(KirchhoffError::InvalidParams(
            "the nonlocal linear problem needs lambda > 0".into(),
        ));
    }
    let v = match problem::membership_m(mesh, &params.f)? {
        Membership::Member { witness } => witness,
        Membership::NonMember { node, value, .. } => {
            return Err(KirchhoffError::NotMember { node, value })
        }
    };
    let c = params.lambda * mesh::h1_seminorm(mesh, &v)?;
    let y = solve_h_root(RootProblem {
        b: params.b,
        alpha: params.alpha,
        c,
    });
    let u = v.scaled(params.lambda / (1.0 + params.b * y.powf(params.alpha)));
    let residual = nonlocal_linear_residual(mesh, params.b, params.alpha, &u, &params.f.scaled(params.lambda))?;
    let scale = params.lambda * params.f.max_abs();
    if residual > 1e-10 * scale {
        return Err(KirchhoffError::LinearSolve {
            residual: residual / scale,
        });
    }
    Ok(u)
}

/// `sup |(1 + b‖∇u‖^{2α})(−Δ_h u) − g|`.
pub fn nonlocal_linear_residual(
    mesh: &DomainMesh,
    b: f64,
    alpha: f64,
    u: &GridFunction,
    g: &GridFunction,
) -> Result<f64> {
    let d = mesh::dirichlet_form(mesh, u)?;
    let lu = mesh::laplacian_apply(mesh, u)?;
    Ok(lu.scaled(1.0 + b * d.powf(alpha)).sup_distance(g))
}

/// `u = w/(1 + b y^α)` with `y` the root for `c = ‖∇w‖`.
pub fn picard_rescale(
    mesh: &DomainMesh,
    params: &ProblemParams,
    w: &GridFunction,
) -> Result<GridFunction> {
    let c = mesh::h1_seminorm(mesh, w)?;
    let y = solve_h_root(RootProblem {
        b: params.b,
        alpha: params.alpha,
        c,
    });
    Ok(w.scaled(1.0 / (1.0 + params.b * y.powf(params.alpha))))
}

/// `v = u/(1+bt)^{1/(p−1)}` and `λ/(1+bt)^{p/(p−1)}` with `t = ‖∇u‖^{2α}`;
/// `v` solves `−Δv = (v⁺)^p + λ_eff f` whenever `u` solves the Kirchhoff problem.
pub fn rescale_to_semilinear(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &GridFunction,
) -> Result<(GridFunction, f64)> {
    let t = mesh::dirichlet_form(mesh, u)?.powf(params.alpha);
    let q = 1.0 + params.b * t;
    let v = u.scaled(q.powf(-1.0 / (params.p - 1.0)));
    Ok((v, params.lambda * q.powf(-params.p / (params.p - 1.0))))
}

/// `sup|−Δ_h v − (v⁺)^p − λ_eff f|` for the rescaled semilinear problem.
pub fn semilinear_residual(
    mesh: &DomainMesh,
    p: f64,
    effective_lambda: f64,
    f: &GridFunction,
    v: &GridFunction,
) -> Result<f64> {
    let lv = mesh::laplacian_apply(mesh, v)?;
    Ok(lv
        .values()
        .iter()
        .zip(v.values())
        .zip(f.values())
        .fold(0.0_f64, |m, ((l, x), g)| {
            m.max((l - x.max(0.0).powf(p) - effective_lambda * g).abs())
        }))
}

/// Transformed field `v = (1 + b t)u/λ` and coefficient
/// `κ = λ^{p−1}/(1 + b t)^p`, so that `−Δv = κ v^p + f`.
pub fn star_transform(
    mesh: &DomainMesh,
    params: &ProblemParams,
    u: &GridFunction,
) -> Result<(GridFunction, f64)> {
    if !(params.lambda > 0.0) {
        return Err(KirchhoffError::InvalidParams(
            "the star transform needs lambda > 0".into(),
        ));
    }
    let t = mesh::dirichlet_form(mesh, u)?.powf(params.alpha);
    let q = 1.0 + params.b * t;
    let kappa = params.lambda.powf(params.p - 1.0) / q.powf(params.p);
    Ok((u.scaled(q / params.lambda), kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainKind};

    fn rp(b: f64, alpha: f64, c: f64) -> RootProblem {
        RootProblem { b, alpha, c }
    }

    #[test]
    fn quadratic_roots() {
        assert!((solve_h_root(rp(1.0, 0.5, 2.0)) - 1.0).abs() < 1e-13);
        assert!((solve_h_root(rp(2.0, 0.5, 6.0)) - 2.25).abs() < 1e-13);
        assert_eq!(solve_h_root(rp(1.0, 0.5, 0.0)), 0.0);
    }

    #[test]
    fn residual_tolerance_across_scales() {
        for &(b, a, c) in &[
            (1e-12, 1.0, 3.0),
            (1e6, 0.5, 1e-9),
            (1e3, 1.9, 1e8),
            (0.3, 0.25, 1e-3),
            (5.0, 1.0, 1e4),
        ] {
            let p = rp(b, a, c);
            let y = solve_h_root(p);
            assert!(y > 0.0);
            assert!(p.h(y).abs() <= 1e-13 * c.max(1.0), "{p:?}: h = {}", p.h(y));
        }
    }

    fn unit(n: usize) -> DomainMesh {
        build_mesh(DomainKind::Interval { length: 1.0 }, n).unwrap()
    }

    #[test]
    fn linear_solve_half_scale() {
        let m = unit(65);
        let one = GridFunction::constant(&m, 1.0);
        let v = mesh::poisson_solve(&m, &one).unwrap();
        let lambda = 2.0 / mesh::h1_seminorm(&m, &v).unwrap();
        let params = ProblemParams::new(&m, 1.0, 0.5, 1.5, lambda, one).unwrap();
        let u = kirchhoff_linear_solve(&m, &params).unwrap();
        assert!(u.sup_distance(&v.scaled(lambda / 2.0)) < 1e-13);
        assert!((mesh::dirichlet_form(&m, &u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_solve_small_lambda_limit() {
        let m = unit(65);
        let one = GridFunction::constant(&m, 1.0);
        let v = mesh::poisson_solve(&m, &one).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [1e-3, 1e-4] {
            let params = ProblemParams::new(&m, 1.0, 1.0, 2.0, lambda, one.clone()).unwrap();
            let u = kirchhoff_linear_solve(&m, &params).unwrap();
            let gap = u.scaled(1.0 / lambda).sup_distance(&v) / v.max_abs();
            assert!(gap < prev / 10.0);
            prev = gap;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn linear_solve_refuses_nonmember() {
        let m = unit(33);
        let params =
            ProblemParams::new(&m, 1.0, 1.0, 2.0, 1.0, GridFunction::constant(&m, -1.0)).unwrap();
        assert!(matches!(
            kirchhoff_linear_solve(&m, &params),
            Err(KirchhoffError::NotMember { .. })
        ));
    }

    #[test]
    fn picard_rescale_examples() {
        let m = unit(65);
        let params =
            ProblemParams::new(&m, 1.0, 0.5, 1.5, 0.0, GridFunction::zeros(&m)).unwrap();
        let z = picard_rescale(&m, &params, &GridFunction::zeros(&m)).unwrap();
        assert_eq!(z.max_abs(), 0.0);

        let psi = mesh::poisson_solve(&m, &GridFunction::constant(&m, 1.0)).unwrap();
        let w = psi.scaled(2.0 / mesh::h1_seminorm(&m, &psi).unwrap());
        let u = picard_rescale(&m, &params, &w).unwrap();
        assert!(u.sup_distance(&w.scaled(0.5)) < 1e-14);
        assert!((mesh::h1_seminorm(&m, &u).unwrap() - 1.0).abs() < 1e-13);

        let lw = mesh::laplacian_apply(&m, &w).unwrap();
        let res = nonlocal_linear_residual(&m, 1.0, 0.5, &u, &lw).unwrap();
        assert!(res <= 1e-11 * lw.max_abs());
    }

    #[test]
    fn semilinear_rescale_degenerate_cases() {
        let m = unit(33);
        let one = GridFunction::constant(&m, 1.0);
        let params = ProblemParams::new(&m, 1e-12, 1.0, 2.0, 0.3, one).unwrap();
        let u = GridFunction::from_fn(&m, |c| c[0] * (1.0 - c[0]));
        let (v, lam) = rescale_to_semilinear(&m, &params, &u).unwrap();
        assert!(v.sup_distance(&u) < 1e-12);
        assert!((lam - 0.3).abs() < 1e-12);
        let (z, lam) = rescale_to_semilinear(&m, &params, &GridFunction::zeros(&m)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert_eq!(lam, 0.3);
    }

    #[test]
    fn linear_solution_maps_back_to_poisson() {
        let m = unit(65);
        let f = GridFunction::from_fn(&m, |c| -2.0 + 12.0 * c[0] - 12.0 * c[0] * c[0]);
        let params = ProblemParams::new(&m, 3.0, 1.0, 2.0, 4.0, f.clone()).unwrap();
        let u = kirchhoff_linear_solve(&m, &params).unwrap();
        let d = mesh::dirichlet_form(&m, &u).unwrap();
        let v = u.scaled((1.0 + 3.0 * d) / 4.0);
        let lv = mesh::laplacian_apply(&m, &v).unwrap();
        assert!(lv.sup_distance(&f) <= 1e-9 * f.max_abs());
    }
}
