//! Uniform finite-difference meshes, the discrete Dirichlet Laplacian and
//! the quadrature used for every norm and integral in the crate.
//!
//! All three domain kinds share one structure: a symmetric stiffness matrix
//! `K` (the discrete Dirichlet form, `‖∇u‖² = uᵀKu`) and positive cell
//! weights `W`, with `−Δ_h = W⁻¹K`. Interval and rectangle cells are the
//! usual `h` and `hx·hy`; radial cells are the exact shell volumes
//! `ω_N (r_{i+½}^N − r_{i−½}^N)/N`, and radial fluxes carry the surface
//! factor `ω_N r_{i+½}^{N−1}`. At `r = 0` the scheme reduces to
//! `−2N(u₁ − u₀)/h²`, the ghost-node form of `−N u″(0)`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::error::{KirchhoffError, Result};
use crate::linalg::{self, BandMatrix};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

const POISSON_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;
const SOBOLEV_TOL: f64 = 1e-8;
const SOBOLEV_MAX_ITER: usize = 20_000;

/// Domain geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// `(0, length)`.
    Interval { length: f64 },
    /// `(0, lx) × (0, ly)`.
    Rectangle { lx: f64, ly: f64 },
    /// Ball of radius `radius` in `R^dim`, radially symmetric fields only.
    RadialBall { dim: usize, radius: f64 },
}

impl DomainKind {
    pub fn dimension(&self) -> usize {
        match self {
            DomainKind::Interval { .. } => 1,
            DomainKind::Rectangle { .. } => 2,
            DomainKind::RadialBall { dim, .. } => *dim,
        }
    }

    /// Largest distance from an interior point to the boundary.
    pub fn inradius(&self) -> f64 {
        match *self {
            DomainKind::Interval { length } => 0.5 * length,
            DomainKind::Rectangle { lx, ly } => 0.5 * lx.min(ly),
            DomainKind::RadialBall { radius, .. } => radius,
        }
    }
}

#[derive(Debug, Clone)]
enum Stiffness {
    /// Symmetric tridiagonal (interval and radial meshes).
    Tridiagonal { diag: Vec<f64>, off: Vec<f64> },
    /// Five-point stencil on an `mx × my` interior grid, row-major in x.
    FivePoint { mx: usize, my: usize, cx: f64, cy: f64 },
}

/// One boundary sample for surface integrals: the interior nodes used by
/// the one-sided normal derivative, the spacing along the normal, the
/// value of `x·ν` (origin at the domain center) and the surface weight.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    /// Nodes at distance `h` and `2h` from the boundary point along the
    /// inward normal; `None` where the neighbour is itself a boundary node.
    pub inner: [Option<usize>; 2],
    pub normal_spacing: f64,
    pub x_dot_nu: f64,
    pub surface_weight: f64,
}

/// Uniform mesh with zero Dirichlet data on the boundary.
#[derive(Debug, Clone)]
pub struct DomainMesh {
    id: u64,
    kind: DomainKind,
    nodes: (usize, usize),
    hx: f64,
    hy: f64,
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    stiffness: Stiffness,
    boundary_layer: Vec<usize>,
    boundary: Vec<BoundarySample>,
    eigen: OnceLock<(f64, GridFunction)>,
    torsion: OnceLock<GridFunction>,
}

/// Nodal field on the interior nodes of a mesh; boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh_id: u64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: &DomainMesh) -> Self {
        GridFunction {
            mesh_id: mesh.id,
            values: vec![0.0; mesh.len()],
        }
    }

    pub fn constant(mesh: &DomainMesh, c: f64) -> Self {
        GridFunction {
            mesh_id: mesh.id,
            values: vec![c; mesh.len()],
        }
    }

    /// Samples `f` at interior node coordinates (`[x, y]`, `[x, 0]` or `[r, 0]`).
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(mesh: &DomainMesh, f: F) -> Self {
        GridFunction {
            mesh_id: mesh.id,
            values: mesh.coords.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn from_values(mesh: &DomainMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(KirchhoffError::MeshMismatch {
                expected: mesh.len(),
                found: values.len(),
            });
        }
        Ok(GridFunction {
            mesh_id: mesh.id,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn belongs_to(&self, mesh: &DomainMesh) -> bool {
        self.mesh_id == mesh.id && self.values.len() == mesh.len()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        GridFunction {
            mesh_id: self.mesh_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, c: f64, other: &GridFunction) -> Self {
        debug_assert_eq!(self.mesh_id, other.mesh_id);
        GridFunction {
            mesh_id: self.mesh_id,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest nodal distance to `other`.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Builds a mesh with `nodes` points per axis, boundary nodes included.
pub fn build_mesh(kind: DomainKind, nodes: usize) -> Result<DomainMesh> {
    match kind {
        DomainKind::Rectangle { .. } => build_rectangle(kind, nodes, nodes),
        _ => build_1d(kind, nodes),
    }
}

/// Rectangle with independent node counts per axis.
pub fn build_rectangle_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<DomainMesh> {
    build_rectangle(DomainKind::Rectangle { lx, ly }, nx, ny)
}

fn check_nodes(n: usize) -> Result<()> {
    if n < 4 {
        return Err(KirchhoffError::InvalidMesh(format!(
            "need at least 4 nodes per axis, got {n}"
        )));
    }
    Ok(())
}

fn check_size(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(KirchhoffError::InvalidMesh(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn build_1d(kind: DomainKind, n: usize) -> Result<DomainMesh> {
    check_nodes(n)?;
    match kind {
        DomainKind::Interval { length } => {
            check_size("length", length)?;
            let h = length / (n - 1) as f64;
            let m = n - 2;
            let coords = (1..n - 1).map(|i| [i as f64 * h, 0.0]).collect();
            let weights = vec![h; m];
            let diag = vec![2.0 / h; m];
            let off = vec![-1.0 / h; m - 1];
            let half = 0.5 * length;
            let boundary = vec![
                BoundarySample {
                    inner: [Some(0), Some(1)],
                    normal_spacing: h,
                    x_dot_nu: half,
                    surface_weight: 1.0,
                },
                BoundarySample {
                    inner: [Some(m - 1), Some(m - 2)],
                    normal_spacing: h,
                    x_dot_nu: half,
                    surface_weight: 1.0,
                },
            ];
            Ok(DomainMesh {
                id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
                kind,
                nodes: (n, 1),
                hx: h,
                hy: 0.0,
                coords,
                weights,
                stiffness: Stiffness::Tridiagonal { diag, off },
                boundary_layer: vec![0, m - 1],
                boundary,
                eigen: OnceLock::new(),
                torsion: OnceLock::new(),
            })
        }
        DomainKind::RadialBall { dim, radius } => {
            if dim != 3 {
                return Err(KirchhoffError::InvalidMesh(format!(
                    "radial meshes support N = 3 only, got N = {dim}"
                )));
            }
            check_size("radius", radius)?;
            let h = radius / (n - 1) as f64;
            let m = n - 1;
            let nd = dim as f64;
            let omega = sphere_area(dim);
            let coords: Vec<[f64; 2]> = (0..m).map(|i| [i as f64 * h, 0.0]).collect();
            let weights: Vec<f64> = (0..m)
                .map(|i| {
                    let r = i as f64 * h;
                    let hi = r + 0.5 * h;
                    let lo = (r - 0.5 * h).max(0.0);
                    omega * (hi.powf(nd) - lo.powf(nd)) / nd
                })
                .collect();
            // face i+1/2 couples node i with node i+1 (node m is the boundary)
            let face: Vec<f64> = (0..m)
                .map(|i| omega * ((i as f64 + 0.5) * h).powi(dim as i32 - 1) / h)
                .collect();
            let mut diag = vec![0.0; m];
            for i in 0..m {
                diag[i] += face[i];
                if i > 0 {
                    diag[i] += face[i - 1];
                }
            }
            let off: Vec<f64> = face[..m - 1].iter().map(|s| -s).collect();
            let boundary = vec![BoundarySample {
                inner: [Some(m - 1), Some(m - 2)],
                normal_spacing: h,
                x_dot_nu: radius,
                surface_weight: omega * radius.powi(dim as i32 - 1),
            }];
            Ok(DomainMesh {
                id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
                kind,
                nodes: (n, 1),
                hx: h,
                hy: 0.0,
                coords,
                weights,
                stiffness: Stiffness::Tridiagonal { diag, off },
                boundary_layer: vec![m - 1],
                boundary,
                eigen: OnceLock::new(),
                torsion: OnceLock::new(),
            })
        }
        DomainKind::Rectangle { .. } => unreachable!("rectangles use build_rectangle"),
    }
}

fn build_rectangle(kind: DomainKind, nx: usize, ny: usize) -> Result<DomainMesh> {
    let DomainKind::Rectangle { lx, ly } = kind else {
        unreachable!("build_rectangle called with {kind:?}")
    };
    check_nodes(nx)?;
    check_nodes(ny)?;
    check_size("lx", lx)?;
    check_size("ly", ly)?;
    let hx = lx / (nx - 1) as f64;
    let hy = ly / (ny - 1) as f64;
    let (mx, my) = (nx - 2, ny - 2);
    let mut coords = Vec::with_capacity(mx * my);
    for j in 0..my {
        for i in 0..mx {
            coords.push([(i + 1) as f64 * hx, (j + 1) as f64 * hy]);
        }
    }
    let idx = |i: usize, j: usize| j * mx + i;
    let boundary_layer = (0..my)
        .flat_map(|j| (0..mx).map(move |i| (i, j)))
        .filter(|&(i, j)| i == 0 || j == 0 || i == mx - 1 || j == my - 1)
        .map(|(i, j)| idx(i, j))
        .collect();

    // trapezoid weights along each edge; corners carry zero normal derivative
    let mut boundary = Vec::new();
    for j in 0..ny {
        let w = if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
        let inner_left = |k: usize| (j > 0 && j < ny - 1).then(|| idx(k, j - 1));
        let inner_right = |k: usize| (j > 0 && j < ny - 1).then(|| idx(mx - 1 - k, j - 1));
        boundary.push(BoundarySample {
            inner: [inner_left(0), inner_left(1)],
            normal_spacing: hx,
            x_dot_nu: 0.5 * lx,
            surface_weight: w,
        });
        boundary.push(BoundarySample {
            inner: [inner_right(0), inner_right(1)],
            normal_spacing: hx,
            x_dot_nu: 0.5 * lx,
            surface_weight: w,
        });
    }
    for i in 0..nx {
        let w = if i == 0 || i == nx - 1 { 0.5 * hx } else { hx };
        let inner_bottom = |k: usize| (i > 0 && i < nx - 1).then(|| idx(i - 1, k));
        let inner_top = |k: usize| (i > 0 && i < nx - 1).then(|| idx(i - 1, my - 1 - k));
        boundary.push(BoundarySample {
            inner: [inner_bottom(0), inner_bottom(1)],
            normal_spacing: hy,
            x_dot_nu: 0.5 * ly,
            surface_weight: w,
        });
        boundary.push(BoundarySample {
            inner: [inner_top(0), inner_top(1)],
            normal_spacing: hy,
            x_dot_nu: 0.5 * ly,
            surface_weight: w,
        });
    }

    Ok(DomainMesh {
        id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
        kind,
        nodes: (nx, ny),
        hx,
        hy,
        coords,
        weights: vec![hx * hy; mx * my],
        stiffness: Stiffness::FivePoint {
            mx,
            my,
            cx: hy / hx,
            cy: hx / hy,
        },
        boundary_layer,
        boundary,
        eigen: OnceLock::new(),
        torsion: OnceLock::new(),
    })
}

/// Surface area of the unit sphere in `R^dim` (`ω_1 = 2`, `ω_3 = 4π`).
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 π^{d/2} / Γ(d/2) via the recurrence ω_{d+2} = 2π ω_d / d
            let mut w = if dim.is_multiple_of(2) { 2.0 * PI } else { 4.0 * PI };
            let mut d = if dim.is_multiple_of(2) { 2 } else { 3 };
            while d < dim {
                w *= 2.0 * PI / d as f64;
                d += 2;
            }
            w
        }
    }
}

impl DomainMesh {
    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    /// Number of unknowns (interior nodes, plus the centre for radial meshes).
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Nodes per axis including boundary nodes.
    pub fn nodes(&self) -> (usize, usize) {
        self.nodes
    }

    /// Grid spacing (x spacing for rectangles).
    pub fn h(&self) -> f64 {
        self.hx
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary_layer(&self) -> &[usize] {
        &self.boundary_layer
    }

    pub fn boundary_samples(&self) -> &[BoundarySample] {
        &self.boundary
    }

    /// Radial meshes carry the node `r = 0` with the symmetry condition `u′(0) = 0`.
    pub fn has_symmetry_node(&self) -> bool {
        matches!(self.kind, DomainKind::RadialBall { .. })
    }

    /// Pohozaev origin: the domain centre (the ball centre for radial meshes).
    pub fn center(&self) -> [f64; 2] {
        match self.kind {
            DomainKind::Interval { length } => [0.5 * length, 0.0],
            DomainKind::Rectangle { lx, ly } => [0.5 * lx, 0.5 * ly],
            DomainKind::RadialBall { .. } => [0.0, 0.0],
        }
    }

    /// Distance from each unknown to the boundary.
    pub fn boundary_distance(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| match self.kind {
                DomainKind::Interval { length } => c[0].min(length - c[0]),
                DomainKind::Rectangle { lx, ly } => c[0].min(lx - c[0]).min(c[1]).min(ly - c[1]),
                DomainKind::RadialBall { radius, .. } => radius - c[0],
            })
            .collect()
    }

    /// `x·∇f` (origin at the centre) by central differences on nodal values,
    /// with zero boundary values taken from the Dirichlet data.
    pub fn x_dot_grad(&self, f: &GridFunction) -> GridFunction {
        let v = f.values();
        let c = self.center();
        let out = match self.stiffness {
            Stiffness::Tridiagonal { .. } => {
                let m = self.len();
                let h = self.hx;
                (0..m)
                    .map(|i| {
                        let x = self.coords[i][0] - c[0];
                        let left = if i == 0 {
                            if self.has_symmetry_node() {
                                v.get(1).copied().unwrap_or(0.0)
                            } else {
                                0.0
                            }
                        } else {
                            v[i - 1]
                        };
                        let right = if i + 1 < m { v[i + 1] } else { 0.0 };
                        x * (right - left) / (2.0 * h)
                    })
                    .collect()
            }
            Stiffness::FivePoint { mx, my, .. } => {
                let at = |i: isize, j: isize| {
                    if i < 0 || j < 0 || i >= mx as isize || j >= my as isize {
                        0.0
                    } else {
                        v[j as usize * mx + i as usize]
                    }
                };
                let mut out = vec![0.0; mx * my];
                for j in 0..my {
                    for i in 0..mx {
                        let k = j * mx + i;
                        let (ii, jj) = (i as isize, j as isize);
                        let dx = (at(ii + 1, jj) - at(ii - 1, jj)) / (2.0 * self.hx);
                        let dy = (at(ii, jj + 1) - at(ii, jj - 1)) / (2.0 * self.hy);
                        out[k] = (self.coords[k][0] - c[0]) * dx + (self.coords[k][1] - c[1]) * dy;
                    }
                }
                out
            }
        };
        GridFunction {
            mesh_id: self.id,
            values: out,
        }
    }

    pub(crate) fn check(&self, u: &GridFunction) -> Result<()> {
        if u.belongs_to(self) {
            Ok(())
        } else {
            Err(KirchhoffError::MeshMismatch {
                expected: self.len(),
                found: u.len(),
            })
        }
    }

    pub(crate) fn wrap(&self, values: Vec<f64>) -> GridFunction {
        debug_assert_eq!(values.len(), self.len());
        GridFunction {
            mesh_id: self.id,
            values,
        }
    }

    /// `K u`, the stiffness (Dirichlet form) matrix applied to raw values.
    pub(crate) fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        match &self.stiffness {
            Stiffness::Tridiagonal { diag, off } => {
                let m = diag.len();
                (0..m)
                    .map(|i| {
                        let mut s = diag[i] * u[i];
                        if i > 0 {
                            s += off[i - 1] * u[i - 1];
                        }
                        if i + 1 < m {
                            s += off[i] * u[i + 1];
                        }
                        s
                    })
                    .collect()
            }
            &Stiffness::FivePoint { mx, my, cx, cy } => {
                let mut out = vec![0.0; mx * my];
                for j in 0..my {
                    for i in 0..mx {
                        let k = j * mx + i;
                        let mut s = 2.0 * (cx + cy) * u[k];
                        if i > 0 {
                            s -= cx * u[k - 1];
                        }
                        if i + 1 < mx {
                            s -= cx * u[k + 1];
                        }
                        if j > 0 {
                            s -= cy * u[k - mx];
                        }
                        if j + 1 < my {
                            s -= cy * u[k + mx];
                        }
                        out[k] = s;
                    }
                }
                out
            }
        }
    }

    /// Solves `K u = b` and returns `u`.
    pub(crate) fn stiffness_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let u = match &self.stiffness {
            Stiffness::Tridiagonal { diag, off } => linalg::solve_tridiagonal(off, diag, off, b)?,
            &Stiffness::FivePoint { cx, cy, .. } => {
                let d = vec![2.0 * (cx + cy); b.len()];
                let (u, _) = linalg::pcg(|x| self.stiffness_apply(x), &d, b, 1e-14, 20 * b.len() + 100);
                u
            }
        };
        let backward = self.backward_error(&u, b);
        if !(backward <= POISSON_TOL) {
            return Err(KirchhoffError::LinearSolve { residual: backward });
        }
        Ok(u)
    }

    /// Normwise backward error `‖Ku − b‖∞ / (‖K‖∞‖u‖∞ + ‖b‖∞)`.
    fn backward_error(&self, u: &[f64], b: &[f64]) -> f64 {
        let ku = self.stiffness_apply(u);
        let r = ku
            .iter()
            .zip(b)
            .fold(0.0_f64, |m, (a, c)| m.max((a - c).abs()));
        let scale = self.stiffness_norm_inf() * linalg::max_abs(u) + linalg::max_abs(b);
        if scale == 0.0 {
            0.0
        } else {
            r / scale
        }
    }

    fn stiffness_norm_inf(&self) -> f64 {
        match &self.stiffness {
            Stiffness::Tridiagonal { diag, off } => {
                let m = diag.len();
                (0..m)
                    .map(|i| {
                        diag[i].abs()
                            + if i > 0 { off[i - 1].abs() } else { 0.0 }
                            + if i + 1 < m { off[i].abs() } else { 0.0 }
                    })
                    .fold(0.0, f64::max)
            }
            Stiffness::FivePoint { cx, cy, .. } => 4.0 * (cx + cy),
        }
    }

    /// Band form of `coef · (−Δ_h) − diag(shift)`, the base operator of the
    /// Newton linearization.
    pub(crate) fn operator_band(&self, coef: f64, shift: &[f64]) -> BandMatrix {
        let m = self.len();
        match &self.stiffness {
            Stiffness::Tridiagonal { diag, off } => {
                let mut band = BandMatrix::zeros(m, 1, 1);
                for i in 0..m {
                    let w = self.weights[i];
                    band.add(i, i, coef * diag[i] / w - shift[i]);
                    if i > 0 {
                        band.add(i, i - 1, coef * off[i - 1] / w);
                    }
                    if i + 1 < m {
                        band.add(i, i + 1, coef * off[i] / w);
                    }
                }
                band
            }
            &Stiffness::FivePoint { mx, my, cx, cy } => {
                let mut band = BandMatrix::zeros(m, mx, mx);
                let w = self.weights[0];
                for j in 0..my {
                    for i in 0..mx {
                        let k = j * mx + i;
                        band.add(k, k, coef * 2.0 * (cx + cy) / w - shift[k]);
                        if i > 0 {
                            band.add(k, k - 1, -coef * cx / w);
                        }
                        if i + 1 < mx {
                            band.add(k, k + 1, -coef * cx / w);
                        }
                        if j > 0 {
                            band.add(k, k - mx, -coef * cy / w);
                        }
                        if j + 1 < my {
                            band.add(k, k + mx, -coef * cy / w);
                        }
                    }
                }
                band
            }
        }
    }

    /// Torsion function `ψ`: `−Δ_h ψ = 1`, cached.
    pub fn torsion(&self) -> Result<&GridFunction> {
        if let Some(t) = self.torsion.get() {
            return Ok(t);
        }
        let t = poisson_solve(self, &GridFunction::constant(self, 1.0))?;
        Ok(self.torsion.get_or_init(|| t))
    }
}

/// `−Δ_h u` with zero Dirichlet data.
pub fn laplacian_apply(mesh: &DomainMesh, u: &GridFunction) -> Result<GridFunction> {
    mesh.check(u)?;
    let ku = mesh.stiffness_apply(u.values());
    Ok(mesh.wrap(ku.iter().zip(&mesh.weights).map(|(k, w)| k / w).collect()))
}

/// Solves `−Δ_h u = rhs` with zero Dirichlet data.
pub fn poisson_solve(mesh: &DomainMesh, rhs: &GridFunction) -> Result<GridFunction> {
    mesh.check(rhs)?;
    let b: Vec<f64> = rhs
        .values()
        .iter()
        .zip(&mesh.weights)
        .map(|(f, w)| f * w)
        .collect();
    Ok(mesh.wrap(mesh.stiffness_solve(&b)?))
}

/// Discrete Dirichlet form `‖∇u‖₂² = uᵀKu`.
pub fn dirichlet_form(mesh: &DomainMesh, u: &GridFunction) -> Result<f64> {
    mesh.check(u)?;
    Ok(linalg::dot(u.values(), &mesh.stiffness_apply(u.values())).max(0.0))
}

/// `‖∇u‖₂`.
pub fn h1_seminorm(mesh: &DomainMesh, u: &GridFunction) -> Result<f64> {
    Ok(dirichlet_form(mesh, u)?.sqrt())
}

/// `(Σ w |u|^q)^{1/q}` for `q ≥ 1`.
pub fn lp_norm(mesh: &DomainMesh, u: &GridFunction, q: f64) -> Result<f64> {
    mesh.check(u)?;
    if !(q >= 1.0) {
        return Err(KirchhoffError::InvalidParams(format!(
            "Lebesgue exponent must be >= 1, got {q}"
        )));
    }
    let s: f64 = u
        .values()
        .iter()
        .zip(&mesh.weights)
        .map(|(v, w)| w * v.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

pub fn sup_norm(mesh: &DomainMesh, u: &GridFunction) -> Result<f64> {
    mesh.check(u)?;
    Ok(u.max_abs())
}

/// Quadrature inner product `Σ w u v`.
pub fn l2_inner(mesh: &DomainMesh, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    mesh.check(u)?;
    mesh.check(v)?;
    Ok(weighted_dot(mesh, u.values(), v.values()))
}

pub(crate) fn weighted_dot(mesh: &DomainMesh, u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(&mesh.weights)
        .map(|((a, b), w)| a * b * w)
        .sum()
}

/// Smallest eigenvalue of `−Δ_h` and its eigenfunction (positive, sup = 1)
/// by inverse power iteration.
pub fn principal_eigenpair(mesh: &DomainMesh) -> Result<(f64, GridFunction)> {
    if let Some((l, phi)) = mesh.eigen.get() {
        return Ok((*l, phi.clone()));
    }
    let pair = inverse_power_iteration(mesh)?;
    Ok(mesh.eigen.get_or_init(|| pair).clone())
}

fn inverse_power_iteration(mesh: &DomainMesh) -> Result<(f64, GridFunction)> {
    let m = mesh.len();
    let w = &mesh.weights;
    let mut u = vec![1.0; m];
    let mut residual = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITER {
        let wu: Vec<f64> = u.iter().zip(w).map(|(a, b)| a * b).collect();
        let mut next = mesh.stiffness_solve(&wu)?;
        let scale = linalg::max_abs(&next);
        next.iter_mut().for_each(|v| *v /= scale);
        u = next;

        let ku = mesh.stiffness_apply(&u);
        let lambda = linalg::dot(&u, &ku) / weighted_dot(mesh, &u, &u);
        // ‖Au − λu‖_W / (λ‖u‖_W)
        let r2: f64 = (0..m)
            .map(|i| {
                let d = ku[i] / w[i] - lambda * u[i];
                w[i] * d * d
            })
            .sum();
        residual = r2.sqrt() / (lambda * weighted_dot(mesh, &u, &u).sqrt());
        if residual <= EIGEN_TOL {
            let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let scale = sign / linalg::max_abs(&u);
            return Ok((lambda, mesh.wrap(u.iter().map(|v| v * scale).collect())));
        }
    }
    Err(KirchhoffError::NonConvergence {
        iterations: EIGEN_MAX_ITER,
        residual,
    })
}

/// Discrete Sobolev constant `S = inf ‖∇u‖² / ‖u‖²_{p+1}` started from `φ₁`.
pub fn sobolev_constant(mesh: &DomainMesh, p: f64) -> Result<f64> {
    let (_, phi) = principal_eigenpair(mesh)?;
    Ok(sobolev_minimizer(mesh, p, &phi)?.0)
}

/// Minimizes the Rayleigh quotient `‖∇u‖²/‖u‖²_{p+1}` by gradient descent in
/// the `H¹₀` metric with Armijo backtracking; iterates are projected back
/// onto `‖u‖_{p+1} = 1`. Returns the quotient and the normalized minimizer.
pub fn sobolev_minimizer(
    mesh: &DomainMesh,
    p: f64,
    initial: &GridFunction,
) -> Result<(f64, GridFunction)> {
    mesh.check(initial)?;
    if !(p >= 1.0) {
        return Err(KirchhoffError::InvalidParams(format!(
            "Sobolev exponent p must be >= 1, got {p}"
        )));
    }
    let q = p + 1.0;
    let normalize = |u: &[f64]| -> Vec<f64> {
        let n: f64 = u
            .iter()
            .zip(&mesh.weights)
            .map(|(v, w)| w * v.abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q);
        u.iter().map(|v| v / n).collect()
    };
    let quotient = |u: &[f64]| linalg::dot(u, &mesh.stiffness_apply(u));

    let mut u = normalize(initial.values());
    if u.iter().any(|v| !v.is_finite()) {
        return Err(KirchhoffError::InvalidParams(
            "initial guess must be nonzero".into(),
        ));
    }
    let mut value = quotient(&u);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..SOBOLEV_MAX_ITER {
        // Sobolev gradient of the quotient at a normalized u (up to the factor 2)
        let nl: Vec<f64> = u
            .iter()
            .zip(&mesh.weights)
            .map(|(v, w)| w * v.abs().powf(p - 1.0) * v)
            .collect();
        let z = mesh.stiffness_solve(&nl)?;
        let d: Vec<f64> = u.iter().zip(&z).map(|(a, b)| a - value * b).collect();
        grad_norm = linalg::dot(&d, &mesh.stiffness_apply(&d)).max(0.0).sqrt();
        if grad_norm <= SOBOLEV_TOL {
            return Ok((value, mesh.wrap(u)));
        }
        let slope = 2.0 * grad_norm * grad_norm;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - step * b).collect();
            let trial = normalize(&trial);
            let tv = quotient(&trial);
            // a full step is the nonlinear inverse iteration, which still
            // contracts once quotient changes are lost in roundoff
            let roundoff = step == 1.0 && tv <= value * (1.0 + 1e-12);
            if tv <= value - 1e-4 * step * slope || roundoff {
                u = trial;
                value = tv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(KirchhoffError::NonConvergence {
        iterations: SOBOLEV_MAX_ITER,
        residual: grad_norm,
    })
}
