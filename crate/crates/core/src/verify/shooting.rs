use crate::error::{KirchhoffError, Result};
use crate::mesh::{sphere_area, DomainKind, DomainMesh, GridFunction};

/// RK4 substeps per half mesh spacing.
const SUBSTEPS: usize = 4;
const SCAN_START: f64 = 1e-8;
const SCAN_END: f64 = 1e8;
const SCAN_FACTOR: f64 = 1.25;
const OUTER_DAMPING: f64 = 0.5;
const OUTER_MAX_ITER: usize = 1000;
const OUTER_TOL: f64 = 1e-10;
const T_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct ShootingSolution {
    /// `u(0)`, the value at the centre.
    pub center_value: f64,
    /// The continuum profile sampled at the mesh unknowns.
    pub profile: GridFunction,
    /// `‖∇u‖₂²` of the continuum profile.
    pub dirichlet: f64,
    /// Nonlocal scalar `t = ‖∇u‖₂^{2α}` at the fixed point; zero for
    /// semilinear problems.
    pub t: f64,
    pub outer_iterations: usize,
}

/// Radial geometry read off an interval (centred, `N = 1`) or ball mesh.
struct Radial {
    dim: f64,
    dr: f64,
    steps: usize,
    /// Step index of each mesh unknown.
    samples: Vec<usize>,
}

impl Radial {
    fn from_mesh(mesh: &DomainMesh) -> Result<Self> {
        let h = mesh.h();
        let dr = h / (2 * SUBSTEPS) as f64;
        let (dim, radius) = match mesh.kind() {
            DomainKind::Interval { length } => (1, 0.5 * length),
            DomainKind::RadialBall { dim, radius } => (dim, radius),
            DomainKind::Rectangle { .. } => {
                return Err(KirchhoffError::InvalidMesh(
                    "shooting needs an interval or a radial mesh".into(),
                ))
            }
        };
        let c = mesh.center();
        let samples = mesh
            .coords()
            .iter()
            .map(|x| ((x[0] - c[0]).abs() / dr).round() as usize)
            .collect();
        Ok(Radial {
            dim: dim as f64,
            dr,
            steps: (radius / dr).round() as usize,
            samples,
        })
    }

    fn accel<G: Fn(f64, f64) -> f64>(&self, g: &G, scale: f64, r: f64, u: f64, du: f64) -> f64 {
        if r == 0.0 {
            -scale * g(0.0, u) / self.dim
        } else {
            -(self.dim - 1.0) / r * du - scale * g(r, u)
        }
    }

    /// Integrates `u″ + ((N−1)/r)u′ + scale·g(r, u) = 0` from `u(0) = a`,
    /// `u′(0) = 0`. Returns `u(R)` and, when asked, the full trajectory.
    fn shoot<G: Fn(f64, f64) -> f64>(
        &self,
        g: &G,
        scale: f64,
        a: f64,
        keep: bool,
    ) -> (f64, Option<(Vec<f64>, Vec<f64>)>) {
        let dr = self.dr;
        let (mut u, mut du) = (a, 0.0);
        let mut traj = keep.then(|| {
            let mut us = Vec::with_capacity(self.steps + 1);
            let mut dus = Vec::with_capacity(self.steps + 1);
            us.push(u);
            dus.push(du);
            (us, dus)
        });
        for k in 0..self.steps {
            let r = k as f64 * dr;
            let k1u = du;
            let k1v = self.accel(g, scale, r, u, du);
            let k2u = du + 0.5 * dr * k1v;
            let k2v = self.accel(g, scale, r + 0.5 * dr, u + 0.5 * dr * k1u, k2u);
            let k3u = du + 0.5 * dr * k2v;
            let k3v = self.accel(g, scale, r + 0.5 * dr, u + 0.5 * dr * k2u, k3u);
            let k4u = du + dr * k3v;
            let k4v = self.accel(g, scale, r + dr, u + dr * k3u, k4u);
            u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            du += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if !u.is_finite() || !du.is_finite() {
                return (f64::NAN, None);
            }
            if let Some((us, dus)) = traj.as_mut() {
                us.push(u);
                dus.push(du);
            }
        }
        (u, traj)
    }

    /// `ω_N ∫₀^R u′² r^{N−1} dr` by Simpson's rule on the trajectory (the
    /// step count is a multiple of `2·SUBSTEPS`, hence even).
    fn dirichlet(&self, du: &[f64]) -> f64 {
        let n = self.steps;
        let e = self.dim as i32 - 1;
        let term = |k: usize| du[k] * du[k] * (k as f64 * self.dr).powi(e);
        let mut s = term(0) + term(n);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * term(k);
        }
        sphere_area(self.dim as usize) * s * self.dr / 3.0
    }

    /// First root of the shooting map over a geometric scan of `u(0)`,
    /// refined by bisection.
    fn center_value<G: Fn(f64, f64) -> f64>(&self, g: &G, scale: f64) -> Result<f64> {
        let mut a_prev = SCAN_START;
        let mut f_prev = self.shoot(g, scale, a_prev, false).0;
        if !f_prev.is_finite() {
            return Err(KirchhoffError::NoSignChange);
        }
        if f_prev == 0.0 {
            return Ok(a_prev);
        }
        let mut a = a_prev;
        while a < SCAN_END {
            a *= SCAN_FACTOR;
            let fa = self.shoot(g, scale, a, false).0;
            if !fa.is_finite() {
                break;
            }
            if fa == 0.0 {
                return Ok(a);
            }
            if fa.signum() != f_prev.signum() {
                return Ok(self.bisect(g, scale, a_prev, f_prev, a));
            }
            a_prev = a;
            f_prev = fa;
        }
        Err(KirchhoffError::NoSignChange)
    }

    fn bisect<G: Fn(f64, f64) -> f64>(
        &self,
        g: &G,
        scale: f64,
        mut lo: f64,
        f_lo: f64,
        mut hi: f64,
    ) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = self.shoot(g, scale, mid, false).0;
            if fm == 0.0 {
                return mid;
            }
            if fm.is_finite() && fm.signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn solve<G: Fn(f64, f64) -> f64>(
        &self,
        mesh: &DomainMesh,
        g: &G,
        scale: f64,
    ) -> Result<(f64, GridFunction, f64)> {
        let a = self.center_value(g, scale)?;
        let (_, traj) = self.shoot(g, scale, a, true);
        let (us, dus) = traj.ok_or(KirchhoffError::NoSignChange)?;
        let profile = GridFunction::from_values(
            mesh,
            self.samples.iter().map(|&k| us[k.min(self.steps)]).collect(),
        )?;
        Ok((a, profile, self.dirichlet(&dus)))
    }
}

/// Solves `−Δu = g(r, u)` with `u = 0` at the boundary by shooting on the
/// radial ODE `u″ + ((N−1)/r)u′ + g = 0` from the centre. Intervals are
/// treated as the one-dimensional ball about their midpoint, so `g` must
/// be symmetric. The first root of `a ↦ u(R; a)` on a geometric scan of
/// `a ∈ [1e−8, 1e8]` is refined by bisection.
pub fn shooting_solve<G: Fn(f64, f64) -> f64>(
    mesh: &DomainMesh,
    g: G,
) -> Result<ShootingSolution> {
    let radial = Radial::from_mesh(mesh)?;
    let (center_value, profile, dirichlet) = radial.solve(mesh, &g, 1.0)?;
    Ok(ShootingSolution {
        center_value,
        profile,
        dirichlet,
        t: 0.0,
        outer_iterations: 0,
    })
}

/// Solves `−(1 + b‖∇u‖^{2α})Δu = g(r, u)` by a damped fixed point on
/// `t = ‖∇u‖^{2α}`, each step shooting `−Δu = g/(1 + bt)`.
///
/// Fails with `NoFixedPoint` when `t` runs off to infinity, the inner
/// problem loses its root, or the iteration does not settle.
pub fn shooting_solve_kirchhoff<G: Fn(f64, f64) -> f64>(
    mesh: &DomainMesh,
    b: f64,
    alpha: f64,
    g: G,
) -> Result<ShootingSolution> {
    if !(b >= 0.0 && alpha > 0.0) {
        return Err(KirchhoffError::InvalidParams(format!(
            "need b ≥ 0 and α > 0, got b = {b}, α = {alpha}"
        )));
    }
    let radial = Radial::from_mesh(mesh)?;
    let mut t = 0.0_f64;
    for it in 1..=OUTER_MAX_ITER {
        let scale = 1.0 / (1.0 + b * t);
        let (a, profile, d) = match radial.solve(mesh, &g, scale) {
            Ok(s) => s,
            Err(KirchhoffError::NoSignChange) if it > 1 => {
                return Err(KirchhoffError::NoFixedPoint { last: t })
            }
            Err(e) => return Err(e),
        };
        let t_new = d.powf(alpha);
        let step = t_new - t;
        if step.abs() <= OUTER_TOL * t.max(1.0) {
            return Ok(ShootingSolution {
                center_value: a,
                profile,
                dirichlet: d,
                t: t_new,
                outer_iterations: it,
            });
        }
        t += OUTER_DAMPING * step;
        if !(t <= T_LIMIT) {
            return Err(KirchhoffError::NoFixedPoint { last: t });
        }
    }
    Err(KirchhoffError::NoFixedPoint { last: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn torsion_profiles() {
        let m = build_mesh(DomainKind::Interval { length: 1.0 }, 33).unwrap();
        let s = shooting_solve(&m, |_, _| 1.0).unwrap();
        assert!((s.center_value - 0.125).abs() < 1e-13);
        assert!(s.profile.sup_distance(m.torsion().unwrap()) < 1e-12);
        // ‖∇ψ‖² = ∫ψ = 1/12
        assert!((s.dirichlet - 1.0 / 12.0).abs() < 1e-12);

        let ball = build_mesh(DomainKind::RadialBall { dim: 3, radius: 1.0 }, 33).unwrap();
        let s = shooting_solve(&ball, |_, _| 1.0).unwrap();
        assert!((s.center_value - 1.0 / 6.0).abs() < 1e-13);
        assert!(s.profile.sup_distance(ball.torsion().unwrap()) < 1e-12);
    }

    #[test]
    fn rectangle_refused() {
        let m = crate::mesh::build_rectangle_mesh(1.0, 1.0, 9, 9).unwrap();
        assert!(matches!(
            shooting_solve(&m, |_, _| 1.0),
            Err(KirchhoffError::InvalidMesh(_))
        ));
    }

    #[test]
    fn no_root_without_sign_change() {
        let m = build_mesh(DomainKind::Interval { length: 1.0 }, 17).unwrap();
        // −u″ = −1 has the negative solution only
        assert_eq!(
            shooting_solve(&m, |_, _| -1.0).unwrap_err(),
            KirchhoffError::NoSignChange
        );
    }

    #[test]
    fn kirchhoff_torsion_scaling() {
        // −(1 + b‖∇u‖²)u″ = 1 with u = sψ: s(1 + b s²/12) = 1
        let m = build_mesh(DomainKind::Interval { length: 1.0 }, 33).unwrap();
        let s = shooting_solve_kirchhoff(&m, 3.0, 1.0, |_, _| 1.0).unwrap();
        let k = 8.0 * s.center_value;
        assert!((k * (1.0 + 3.0 * k * k / 12.0) - 1.0).abs() < 1e-9);
    }
}
