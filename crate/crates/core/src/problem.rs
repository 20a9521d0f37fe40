//! Problem parameters, exponent regimes, the homogeneous threshold `b₀`
//! and the data classes `M` (nonnegative Poisson witness) and `F⁺`
//! (nonnegative near the boundary).

use crate::error::{KirchhoffError, Result};
use crate::mesh::{self, DomainMesh, GridFunction};

/// Exponent regime of `(p, α, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `1 < p < 2α + 1`: coercive energy, global minimizer.
    A,
    /// `2α + 1 < p < 2*`: mountain-pass multiplicity.
    B,
    /// `p > 2*`: supercritical.
    C,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::A => "A",
            Regime::B => "B",
            Regime::C => "C",
        };
        f.write_str(s)
    }
}

/// Critical exponent `2* = (N+2)/(N−2)`, `+∞` for `N ≤ 2`.
pub fn two_star(dim: usize) -> f64 {
    if dim <= 2 {
        f64::INFINITY
    } else {
        (dim as f64 + 2.0) / (dim as f64 - 2.0)
    }
}

/// Classifies the exponents, rejecting `p = 2α+1` and `p = 2*`.
pub fn classify_exponents(p: f64, alpha: f64, dim: usize) -> Result<Regime> {
    let ts = two_star(dim);
    let knee = 2.0 * alpha + 1.0;
    if (p - knee).abs() <= 1e-12 * knee {
        return Err(KirchhoffError::BoundaryExponent(format!(
            "p = 2α+1 = {knee} has no classification"
        )));
    }
    if ts.is_finite() && (p - ts).abs() <= 1e-12 * ts {
        return Err(KirchhoffError::BoundaryExponent(format!(
            "p = 2* = {ts} has no classification"
        )));
    }
    Ok(if p < knee {
        Regime::A
    } else if p < ts {
        Regime::B
    } else {
        Regime::C
    })
}

/// Checks the scalar parameter constraints shared by every entry point.
pub fn validate_scalars(b: f64, alpha: f64, p: f64, lambda: f64, dim: usize) -> Result<()> {
    let bad = |msg: String| Err(KirchhoffError::InvalidParams(msg));
    if !(b > 0.0 && b.is_finite()) {
        return bad(format!("b must be positive, got {b}"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return bad(format!("p must exceed 1, got {p}"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return bad(format!("lambda must be nonnegative, got {lambda}"));
    }
    let alpha_max = 0.5 * (two_star(dim) - 1.0);
    if !(alpha > 0.0 && alpha < alpha_max) {
        return bad(format!("alpha must lie in (0, {alpha_max}), got {alpha}"));
    }
    Ok(())
}

/// `(b, α, p, λ, f)` on a fixed mesh; the dimension comes from the mesh.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub b: f64,
    pub alpha: f64,
    pub p: f64,
    pub lambda: f64,
    pub dim: usize,
    pub f: GridFunction,
}

impl ProblemParams {
    pub fn new(
        mesh: &DomainMesh,
        b: f64,
        alpha: f64,
        p: f64,
        lambda: f64,
        f: GridFunction,
    ) -> Result<Self> {
        let dim = mesh.dimension();
        validate_scalars(b, alpha, p, lambda, dim)?;
        if !f.belongs_to(mesh) {
            return Err(KirchhoffError::MeshMismatch {
                expected: mesh.len(),
                found: f.len(),
            });
        }
        if lambda > 0.0 && f.max_abs() == 0.0 {
            return Err(KirchhoffError::InvalidParams(
                "forcing must be nonzero when lambda > 0".into(),
            ));
        }
        Ok(ProblemParams {
            b,
            alpha,
            p,
            lambda,
            dim,
            f,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ProblemParams {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_b(&self, b: f64) -> Self {
        ProblemParams { b, ..self.clone() }
    }

    pub fn regime(&self) -> Result<Regime> {
        classify_exponents(self.p, self.alpha, self.dim)
    }
}

/// Mesh-dependent constants used by bounds and solver gates.
#[derive(Debug, Clone)]
pub struct MeshConstants {
    pub lambda1: f64,
    pub phi1: GridFunction,
    /// Discrete `S = inf ‖∇u‖²/‖u‖²_{p+1}`.
    pub sobolev: f64,
    /// Embedding constant `S^{−(p+1)/2}` in `‖u‖^{p+1}_{p+1} ≤ C‖∇u‖^{p+1}`.
    pub embedding: f64,
    pub p: f64,
}

impl MeshConstants {
    pub fn compute(mesh: &DomainMesh, p: f64) -> Result<Self> {
        let (lambda1, phi1) = mesh::principal_eigenpair(mesh)?;
        let sobolev = mesh::sobolev_constant(mesh, p)?;
        Ok(MeshConstants {
            lambda1,
            phi1,
            sobolev,
            embedding: sobolev.powf(-(p + 1.0) / 2.0),
            p,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeInfo {
    pub two_star: f64,
    pub gamma: f64,
    pub regime: Regime,
    pub b0: Option<f64>,
    pub l: f64,
}

pub fn classify_regime(params: &ProblemParams, constants: &MeshConstants) -> Result<RegimeInfo> {
    let regime = params.regime()?;
    let gamma = 2.0 * params.alpha + 1.0 - params.p;
    let b0 = match regime {
        Regime::A => Some(b0_formula(params.p, params.alpha, constants.sobolev)),
        _ => None,
    };
    Ok(RegimeInfo {
        two_star: two_star(params.dim),
        gamma,
        regime,
        b0,
        l: constants.sobolev.powf((params.p + 1.0) / 2.0),
    })
}

/// `b₀ = (p−1) γ^{γ/(p−1)} (2αl)^{−2α/(p−1)}` with `l = S^{(p+1)/2}`.
pub fn compute_b0(params: &ProblemParams, sobolev: f64) -> Result<f64> {
    let regime = params.regime()?;
    if regime != Regime::A {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::A,
            found: regime,
        });
    }
    Ok(b0_formula(params.p, params.alpha, sobolev))
}

fn b0_formula(p: f64, alpha: f64, sobolev: f64) -> f64 {
    let gamma = 2.0 * alpha + 1.0 - p;
    let l = sobolev.powf((p + 1.0) / 2.0);
    (p - 1.0) * gamma.powf(gamma / (p - 1.0)) * (2.0 * alpha * l).powf(-2.0 * alpha / (p - 1.0))
}

/// Outcome of the `M` decision procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Member { witness: GridFunction },
    NonMember { node: usize, value: f64, witness: GridFunction },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }

    pub fn witness(&self) -> &GridFunction {
        match self {
            Membership::Member { witness } | Membership::NonMember { witness, .. } => witness,
        }
    }
}

/// Solves `−Δw = f` and accepts iff `min w ≥ −1e−10·sup|w|`.
pub fn membership_m(mesh: &DomainMesh, f: &GridFunction) -> Result<Membership> {
    if f.max_abs() == 0.0 {
        return Err(KirchhoffError::InvalidParams(
            "membership test needs a nonzero forcing".into(),
        ));
    }
    let w = mesh::poisson_solve(mesh, f)?;
    let tol = 1e-10 * w.max_abs();
    let (node, value) = w
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if value >= -tol {
        Ok(Membership::Member { witness: w })
    } else {
        Ok(Membership::NonMember {
            node,
            value,
            witness: w,
        })
    }
}

/// True iff `f ≥ −1e−10·sup|f|` at every node within `layer` of the boundary.
pub fn membership_fplus(mesh: &DomainMesh, f: &GridFunction, layer: f64) -> Result<bool> {
    mesh.check(f)?;
    let min = mesh.h();
    let max = mesh.kind().inradius();
    if !(layer >= min * (1.0 - 1e-12) && layer <= max) {
        return Err(KirchhoffError::InvalidLayer {
            width: layer,
            min,
            max,
        });
    }
    let tol = 1e-10 * f.max_abs();
    let dist = mesh.boundary_distance();
    Ok(f
        .values()
        .iter()
        .zip(&dist)
        .filter(|(_, &d)| d <= layer * (1.0 + 1e-12))
        .all(|(&v, _)| v >= -tol))
}

/// Regime-A floor of the energy:
/// `−γ/(2(α+1)(p+1))·[C^{2(α+1)}/b^{p+1}]^{1/γ} − λ²‖f‖²/λ₁` with `C` the
/// embedding constant.
pub fn energy_lower_bound(
    mesh: &DomainMesh,
    params: &ProblemParams,
    constants: &MeshConstants,
) -> Result<f64> {
    let regime = params.regime()?;
    if regime != Regime::A {
        return Err(KirchhoffError::RegimeMismatch {
            expected: Regime::A,
            found: regime,
        });
    }
    let (p, a, b) = (params.p, params.alpha, params.b);
    let gamma = 2.0 * a + 1.0 - p;
    let c = constants.embedding;
    let homogeneous = -gamma / (2.0 * (a + 1.0) * (p + 1.0))
        * (c.powf(2.0 * (a + 1.0)) / b.powf(p + 1.0)).powf(1.0 / gamma);
    let f2 = mesh::l2_inner(mesh, &params.f, &params.f)?;
    Ok(homogeneous - params.lambda * params.lambda * f2 / constants.lambda1)
}
