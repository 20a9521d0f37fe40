use crate::error::{KirchhoffError, Result};
use crate::mesh::{DomainMesh, GridFunction};
use crate::problem::ProblemParams;

/// Upper barrier `ψ₀ = M₀ψ` with `ψ` the torsion function.
#[derive(Debug, Clone)]
pub struct Barrier {
    pub m0: f64,
    pub psi0: GridFunction,
    /// `M₀^p`.
    pub lambda_cap: f64,
}

impl Barrier {
    /// First node violating `0 ≤ u ≤ ψ₀` (with a roundoff slack).
    pub fn violation(&self, u: &GridFunction) -> Option<usize> {
        let slack = 1e-12 * self.psi0.max_abs();
        u.values()
            .iter()
            .zip(self.psi0.values())
            .position(|(&v, &cap)| v < -slack || v > cap + slack)
    }
}

/// Largest `M₀ ∈ {2^{−k} : k = 0..60}` with `M₀ ≥ (M₀ sup ψ)^p + λ sup|f|`.
pub fn build_barrier(mesh: &DomainMesh, params: &ProblemParams) -> Result<Barrier> {
    let psi = mesh.torsion()?;
    let sup_psi = psi.max_abs();
    let forcing = params.lambda * params.f.max_abs();
    let p = params.p;
    let m0 = (0..=60)
        .map(|k| 0.5_f64.powi(k))
        .find(|&m| m >= (m * sup_psi).powf(p) + forcing)
        .ok_or(KirchhoffError::NoBarrier {
            lambda: params.lambda,
        })?;
    let psi0 = psi.scaled(m0);
    // −Δψ₀ = M₀ must dominate ψ₀^p + λf at every node
    let dominated = psi0
        .values()
        .iter()
        .zip(params.f.values())
        .all(|(&b, &f)| m0 >= b.powf(p) + params.lambda * f);
    if !dominated {
        return Err(KirchhoffError::NoBarrier {
            lambda: params.lambda,
        });
    }
    Ok(Barrier {
        m0,
        psi0,
        lambda_cap: m0.powf(p),
    })
}
