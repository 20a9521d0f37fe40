use crate::energy;
use crate::error::{KirchhoffError, Result};
use crate::mesh::{self, DomainMesh, GridFunction};
use crate::problem::{MeshConstants, ProblemParams};

const MAX_DOUBLINGS: usize = 80;

/// Mountain-pass geometry from the discrete constants.
///
/// With `C` the embedding constant, `E(u) ≥ ¼ρ² − Cρ^{p+1}/(p+1) − λ²‖f‖²/λ₁`
/// on `‖∇u‖ = ρ`. The first two terms peak at `ρ₀ = (2C)^{−1/(p−1)}` with
/// value `E₁`; below `β_f = √(3E₁λ₁)/(2‖f‖)` the sphere carries energy at
/// least `E₀ = E₁/4`.
#[derive(Debug, Clone)]
pub struct PassGeometry {
    pub rho0: f64,
    pub e1: f64,
    pub e0: f64,
    pub beta_f: f64,
    /// Largest λ for which the nonlocal linear solution lies in `B_{ρ₀/√2}`.
    pub lambda_star: f64,
    pub t0: f64,
    /// `t₀φ₁`, an endpoint with negative energy outside the ball.
    pub endpoint: GridFunction,
}

pub fn step1_geometry(
    mesh: &DomainMesh,
    params: &ProblemParams,
    constants: &MeshConstants,
) -> Result<PassGeometry> {
    let p = params.p;
    let c = constants.embedding;
    let rho0 = (1.0 / (2.0 * c)).powf(1.0 / (p - 1.0));
    let e1 = 0.25 * rho0 * rho0 - c * rho0.powf(p + 1.0) / (p + 1.0);
    let f_norm = mesh::lp_norm(mesh, &params.f, 2.0)?;
    let (beta_f, lambda_star) = if f_norm > 0.0 {
        (
            (3.0 * e1 * constants.lambda1).sqrt() / (2.0 * f_norm),
            constants.lambda1.sqrt() * rho0 / (2.0 * f_norm),
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    let phi = &constants.phi1;
    let phi_semi = mesh::h1_seminorm(mesh, phi)?;
    let mut t0 = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let e = phi.scaled(t0);
        if t0 * phi_semi > rho0 && energy::energy_eval(mesh, params, &e)?.total < 0.0 {
            return Ok(PassGeometry {
                rho0,
                e1,
                e0: 0.25 * e1,
                beta_f,
                lambda_star,
                t0,
                endpoint: e,
            });
        }
        t0 *= 2.0;
    }
    Err(KirchhoffError::Geometry(format!(
        "energy along the first eigenfunction stays nonnegative up to t = {t0:e}"
    )))
}
