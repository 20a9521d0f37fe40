use crate::error::{KirchhoffError, Result};
use crate::mesh::{self, DomainMesh, GridFunction};

/// Nonlinearity `g(x, ω) = κ (ω⁺)^p + f(x)` of the problem `Δω + g = 0`,
/// with `x·∇f` sampled at the nodes (origin at the domain centre).
#[derive(Debug, Clone)]
pub struct PowerSource {
    pub kappa: f64,
    pub p: f64,
    pub f: GridFunction,
    pub x_dot_grad_f: GridFunction,
}

impl PowerSource {
    /// Constant forcing `f ≡ c`.
    pub fn constant(mesh: &DomainMesh, kappa: f64, p: f64, c: f64) -> Self {
        PowerSource {
            kappa,
            p,
            f: GridFunction::constant(mesh, c),
            x_dot_grad_f: GridFunction::zeros(mesh),
        }
    }

    /// Forcing and its gradient given in mesh coordinates.
    pub fn from_fns<F, G>(mesh: &DomainMesh, kappa: f64, p: f64, f: F, grad_f: G) -> Self
    where
        F: Fn([f64; 2]) -> f64,
        G: Fn([f64; 2]) -> [f64; 2],
    {
        let c = mesh.center();
        PowerSource {
            kappa,
            p,
            f: GridFunction::from_fn(mesh, f),
            x_dot_grad_f: GridFunction::from_fn(mesh, |x| {
                let g = grad_f(x);
                (x[0] - c[0]) * g[0] + (x[1] - c[1]) * g[1]
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PohozaevReport {
    /// `∫_{∂Ω} x·ν |∇ω|² dS`.
    pub boundary: f64,
    /// `2N∫G + 2∫x·∇ₓG − (N−2)∫gω`.
    pub volume: f64,
    /// `boundary − volume`.
    pub residual: f64,
    /// `|residual|` over the larger of the two sides (zero when both vanish).
    pub relative: f64,
    /// `N − 2 − 2N/(p+1)`, positive exactly for supercritical `p`.
    pub eta: f64,
}

/// Both sides of the Pohozaev identity for a discrete solution of
/// `Δω + g(x, ω) = 0`. The boundary flux uses the second-order one-sided
/// normal derivative `(4ω₁ − ω₂)/(2h)`.
pub fn pohozaev_residual(
    mesh: &DomainMesh,
    source: &PowerSource,
    omega: &GridFunction,
) -> Result<PohozaevReport> {
    mesh.check(omega)?;
    mesh.check(&source.f)?;
    mesh.check(&source.x_dot_grad_f)?;
    if mesh.boundary_samples().is_empty() {
        return Err(KirchhoffError::InvalidMesh(
            "mesh carries no boundary samples".into(),
        ));
    }
    let n = mesh.dimension() as f64;
    let p = source.p;
    let w = omega.values();

    let boundary: f64 = mesh
        .boundary_samples()
        .iter()
        .map(|s| {
            let at = |k: Option<usize>| k.map_or(0.0, |i| w[i]);
            let (w1, w2) = (at(s.inner[0]), at(s.inner[1]));
            let dn = match s.inner[1] {
                Some(_) => (4.0 * w1 - w2) / (2.0 * s.normal_spacing),
                None => w1 / s.normal_spacing,
            };
            s.x_dot_nu * s.surface_weight * dn * dn
        })
        .sum();

    let volume: f64 = w
        .iter()
        .zip(mesh.weights())
        .zip(source.f.values())
        .zip(source.x_dot_grad_f.values())
        .map(|(((&v, &wt), &f), &xf)| {
            let vp = v.max(0.0);
            let big_g = source.kappa * vp.powf(p + 1.0) / (p + 1.0) + f * v;
            let g = source.kappa * vp.powf(p) + f;
            wt * (2.0 * n * big_g + 2.0 * xf * v - (n - 2.0) * g * v)
        })
        .sum();

    let residual = boundary - volume;
    let scale = boundary.abs().max(volume.abs());
    Ok(PohozaevReport {
        boundary,
        volume,
        residual,
        relative: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
        eta: n - 2.0 - 2.0 * n / (p + 1.0),
    })
}

/// `‖∇v‖²` of a transformed solution next to the a-priori bound
/// `(2/η)∫(x·∇f)v + (1 + (N+2)/η)∫fv`, meaningful when `η > 0`.
pub fn transformed_gradient_bound(
    mesh: &DomainMesh,
    source: &PowerSource,
    v: &GridFunction,
) -> Result<(f64, f64)> {
    let d = mesh::dirichlet_form(mesh, v)?;
    let n = mesh.dimension() as f64;
    let eta = n - 2.0 - 2.0 * n / (source.p + 1.0);
    let xf = mesh::l2_inner(mesh, &source.x_dot_grad_f, v)?;
    let fv = mesh::l2_inner(mesh, &source.f, v)?;
    Ok((d, 2.0 / eta * xf + (1.0 + (n + 2.0) / eta) * fv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainKind};

    #[test]
    fn zero_field_balances() {
        let m = build_mesh(DomainKind::Interval { length: 1.0 }, 17).unwrap();
        let src = PowerSource::constant(&m, 0.0, 3.0, 0.0);
        let r = pohozaev_residual(&m, &src, &GridFunction::zeros(&m)).unwrap();
        assert_eq!((r.boundary, r.volume, r.residual, r.relative), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn torsion_on_interval() {
        // ω = x(1−x)/2: boundary term 2·½·¼ = ¼, volume 3∫ω = ¼
        for n in [17, 33, 65] {
            let m = build_mesh(DomainKind::Interval { length: 1.0 }, n).unwrap();
            let psi = m.torsion().unwrap().clone();
            let src = PowerSource::constant(&m, 0.0, 3.0, 1.0);
            let r = pohozaev_residual(&m, &src, &psi).unwrap();
            assert!((r.boundary - 0.25).abs() < 1e-14);
            assert!(r.relative <= 5.0 * m.h(), "{r:?}");
        }
    }

    #[test]
    fn eta_sign_tracks_criticality() {
        let m = build_mesh(DomainKind::RadialBall { dim: 3, radius: 1.0 }, 9).unwrap();
        let z = GridFunction::zeros(&m);
        for (p, positive) in [(4.0, false), (5.0, false), (6.0, true)] {
            let r = pohozaev_residual(&m, &PowerSource::constant(&m, 1.0, p, 1.0), &z).unwrap();
            assert_eq!(r.eta > 0.0, positive, "p = {p}");
        }
    }
}
