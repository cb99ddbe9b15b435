//! 3D reference model on the fixed domain `O = (0,L)×S`: P1 wedges, transformed
//! strain `∇_h u (Id + (h/L)B)`, Jacobi PCG.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::FieldSample;
use crate::geometry::mesh2d::EDGE_MIDPOINT_RULE;
use crate::geometry::{make_disc_mesh, CrossSection, SectionKind, TriGeometry, TriMesh};
use crate::linalg::{dot, pcg_jacobi, CgOutcome, CsrMatrix};
use crate::rod1d::{EnergyReport, RodBC, RodState1D};

/// 18×18 element stiffness of one wedge, dof `3p + i`.
pub type WedgeMatrix = [[f64; 18]; 18];

/// Discretization and solver settings of the 3D model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solve3dConfig {
    /// Rings of the disc mesh when the section has no mesh of its own.
    pub rings: usize,
    pub n_layers: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for Solve3dConfig {
    fn default() -> Self {
        Self {
            rings: 4,
            n_layers: 40,
            tol: 1e-8,
            max_iters: 50_000,
        }
    }
}

/// The section with moments and `J` taken from the mesh the 3D model uses.
pub fn meshed_section(section: &CrossSection, rings: usize) -> Result<CrossSection> {
    match (&section.mesh, &section.kind) {
        (Some(_), _) => Ok(section.clone()),
        (None, SectionKind::Disc { radius }) => make_disc_mesh(*radius, rings),
        (None, SectionKind::Polygon { .. }) => Err(Error::InvalidGeometry(
            "polygon section without mesh".into(),
        )),
    }
}

/// Section triangulation extruded over `n_layers` uniform axial layers.
#[derive(Clone, Debug)]
pub struct PrismMesh {
    pub section: TriMesh,
    pub n_layers: usize,
    pub length: f64,
}

pub fn build_prism_mesh(section: &CrossSection, n_layers: usize, length: f64) -> Result<PrismMesh> {
    let mesh = section
        .mesh
        .clone()
        .ok_or_else(|| Error::InvalidGeometry("3D mesh needs a meshed section".into()))?;
    PrismMesh::new(mesh, n_layers, length)
}

impl PrismMesh {
    pub fn new(section: TriMesh, n_layers: usize, length: f64) -> Result<Self> {
        section.validate()?;
        if n_layers == 0 || !(length > 0.0) {
            return Err(invalid(
                "prism mesh needs at least one layer and a positive length",
            ));
        }
        Ok(Self {
            section,
            n_layers,
            length,
        })
    }

    pub fn n_section_nodes(&self) -> usize {
        self.section.n_nodes()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_section_nodes() * (self.n_layers + 1)
    }

    pub fn n_elements(&self) -> usize {
        self.section.n_triangles() * self.n_layers
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_layers as f64
    }

    pub fn node(&self, layer: usize, a: usize) -> usize {
        layer * self.n_section_nodes() + a
    }

    pub fn coords(&self, node: usize) -> [f64; 3] {
        let n = self.n_section_nodes();
        let p = self.section.nodes[node % n];
        [(node / n) as f64 * self.dx(), p[0], p[1]]
    }

    /// Element `e = layer·n_tri + t`: bottom triangle then top triangle.
    pub fn element_nodes(&self, e: usize) -> [usize; 6] {
        let nt = self.section.n_triangles();
        let (layer, t) = (e / nt, e % nt);
        let tri = self.section.triangles[t];
        let b = |k: usize, a: usize| self.node(k, a);
        [
            b(layer, tri[0]),
            b(layer, tri[1]),
            b(layer, tri[2]),
            b(layer + 1, tri[0]),
            b(layer + 1, tri[1]),
            b(layer + 1, tri[2]),
        ]
    }

    /// `area·dx` per element; positive for counter-clockwise triangles.
    pub fn element_jacobians(&self) -> Vec<f64> {
        let dx = self.dx();
        let per: Vec<f64> = (0..self.section.n_triangles())
            .map(|t| self.section.geometry(t).area * dx)
            .collect();
        (0..self.n_layers)
            .flat_map(|_| per.iter().copied())
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.element_jacobians().iter().sum()
    }

    pub fn write_csv(&self, dir: &Path, prefix: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("{prefix}nodes.csv")),
        )?);
        writeln!(f, "node,x1,x2,x3")?;
        for n in 0..self.n_nodes() {
            let c = self.coords(n);
            writeln!(f, "{n},{},{},{}", c[0], c[1], c[2])?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("{prefix}elements.csv")),
        )?);
        writeln!(f, "element,n0,n1,n2,n3,n4,n5")?;
        for e in 0..self.n_elements() {
            let v = self.element_nodes(e);
            writeln!(
                f,
                "{e},{},{},{},{},{},{}",
                v[0], v[1], v[2], v[3], v[4], v[5]
            )?;
        }
        Ok(())
    }
}

/// Nodal displacements.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement3D {
    pub u: Vec<[f64; 3]>,
}

impl Displacement3D {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![[0.0; 3]; n],
        }
    }

    pub fn from_dofs(x: &[f64]) -> Self {
        Self {
            u: x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        }
    }

    pub fn to_dofs(&self) -> Vec<f64> {
        self.u.iter().flatten().copied().collect()
    }

    pub fn write_csv(&self, mesh: &PrismMesh, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "node,x1,x2,x3,u1,u2,u3")?;
        for (n, u) in self.u.iter().enumerate() {
            let c = mesh.coords(n);
            writeln!(
                f,
                "{n},{},{},{},{},{},{}",
                c[0], c[1], c[2], u[0], u[1], u[2]
            )?;
        }
        Ok(())
    }
}

/// Material and perturbation, constant over one axial layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerCoefficients {
    pub mu: f64,
    pub lambda: f64,
    pub phi: [f64; 2],
}

/// Wedge stiffness with exact in-plane quadrature and the axial midpoint rule.
pub fn element_matrix(
    tri: &TriGeometry,
    dx: f64,
    c: &LayerCoefficients,
    h: f64,
    length: f64,
) -> WedgeMatrix {
    let mut k = [[0.0; 18]; 18];
    let (mu, lam) = (c.mu, c.lambda);
    for (bary, wfrac) in EDGE_MIDPOINT_RULE.iter() {
        let w = wfrac * tri.area * dx / length;
        // transformed gradients of the six shape functions at (qp, midpoint)
        let mut g = [[0.0; 3]; 6];
        for p in 0..6 {
            let a = p % 3;
            let d1 = if p < 3 { -bary[a] / dx } else { bary[a] / dx };
            let d2 = 0.5 * tri.grad[a][0];
            let d3 = 0.5 * tri.grad[a][1];
            g[p] = [
                d1 - (c.phi[0] * d2 + c.phi[1] * d3) / length,
                d2 / h,
                d3 / h,
            ];
        }
        for p in 0..6 {
            for q in 0..6 {
                let gg = dot(&g[p], &g[q]);
                for i in 0..3 {
                    for kk in 0..3 {
                        let mut v = mu * g[p][kk] * g[q][i] + lam * g[p][i] * g[q][kk];
                        if i == kk {
                            v += mu * gg;
                        }
                        k[3 * p + i][3 * q + kk] += w * v;
                    }
                }
            }
        }
    }
    k
}

/// Assembled problem: full stiffness, Dirichlet lift and the reduced system
/// for the interior layers.
#[derive(Clone, Debug)]
pub struct System3D {
    pub mesh: PrismMesh,
    pub h: f64,
    pub layers: Vec<LayerCoefficients>,
    /// Energy `xᵀKx` over all nodal dofs.
    pub full: CsrMatrix,
    pub lift: Vec<f64>,
    /// Interior-layer block of `K`.
    pub reduced: CsrMatrix,
    /// `−(K·lift)` on the interior dofs.
    pub rhs: Vec<f64>,
    pub lift_energy: f64,
}

fn layer_coefficients(mesh: &PrismMesh, sample: &FieldSample) -> Result<Vec<LayerCoefficients>> {
    sample.validate()?;
    let cells = sample.n_cells();
    if mesh.n_layers % cells != 0 {
        return Err(invalid(format!(
            "{} layers are not a multiple of the {cells} field cells",
            mesh.n_layers
        )));
    }
    if (sample.length - mesh.length).abs() > 1e-12 * mesh.length {
        return Err(invalid("sample length differs from rod length"));
    }
    let per = mesh.n_layers / cells;
    Ok((0..mesh.n_layers)
        .map(|k| {
            let c = k / per;
            let m = sample.material(c);
            LayerCoefficients {
                mu: m.mu,
                lambda: m.lambda,
                phi: [sample.phi1[c], sample.phi2[c]],
            }
        })
        .collect())
}

fn full_pattern(mesh: &PrismMesh) -> CsrMatrix {
    let adj = mesh.section.node_adjacency();
    let ns = mesh.n_section_nodes();
    let mut rows = Vec::with_capacity(3 * mesh.n_nodes());
    for layer in 0..=mesh.n_layers {
        for a in 0..ns {
            let mut cols = Vec::new();
            for kk in layer.saturating_sub(1)..=(layer + 1).min(mesh.n_layers) {
                for &b in &adj[a] {
                    let n = mesh.node(kk, b);
                    cols.extend_from_slice(&[3 * n, 3 * n + 1, 3 * n + 2]);
                }
            }
            for _ in 0..3 {
                rows.push(cols.clone());
            }
        }
    }
    CsrMatrix::from_pattern(rows)
}

/// Submatrix on the contiguous dof range `lo..hi`.
fn restrict(k: &CsrMatrix, lo: usize, hi: usize) -> CsrMatrix {
    let rows: Vec<Vec<usize>> = (lo..hi)
        .map(|i| {
            k.cols[k.row_ptr[i]..k.row_ptr[i + 1]]
                .iter()
                .filter(|&&j| j >= lo && j < hi)
                .map(|j| j - lo)
                .collect()
        })
        .collect();
    let mut r = CsrMatrix::from_pattern(rows);
    for i in lo..hi {
        for p in k.row_ptr[i]..k.row_ptr[i + 1] {
            let j = k.cols[p];
            if j >= lo && j < hi {
                r.add(i - lo, j - lo, k.vals[p]);
            }
        }
    }
    r
}

/// Affine end data: `(0, (hA₀+K₀)x̄)` at `x₁ = 0` and
/// `t + (0, (hA_L+K_L)(x̄ + ⨍Φ))` at `x₁ = L`; zero inside.
pub fn dirichlet_lift(mesh: &PrismMesh, bc: &RodBC, h: f64, phi_mean: [f64; 2]) -> Vec<f64> {
    let ns = mesh.n_section_nodes();
    let mut x = vec![0.0; 3 * mesh.n_nodes()];
    let m0 = affine_end_matrix(bc.a0, bc.k0, h);
    let ml = affine_end_matrix(bc.al, bc.kl, h);
    for a in 0..ns {
        let p = mesh.section.nodes[a];
        let n0 = mesh.node(0, a);
        x[3 * n0 + 1] = m0[0][0] * p[0] + m0[0][1] * p[1];
        x[3 * n0 + 2] = m0[1][0] * p[0] + m0[1][1] * p[1];
        let nl = mesh.node(mesh.n_layers, a);
        let q = [p[0] + phi_mean[0], p[1] + phi_mean[1]];
        x[3 * nl] = bc.t[0];
        x[3 * nl + 1] = bc.t[1] + ml[0][0] * q[0] + ml[0][1] * q[1];
        x[3 * nl + 2] = bc.t[2] + ml[1][0] * q[0] + ml[1][1] * q[1];
    }
    x
}

fn affine_end_matrix(a: [[f64; 2]; 2], k: f64, h: f64) -> [[f64; 2]; 2] {
    let km = RodBC::k_matrix(k);
    [
        [h * a[0][0] + km[0][0], h * a[0][1] + km[0][1]],
        [h * a[1][0] + km[1][0], h * a[1][1] + km[1][1]],
    ]
}

pub fn assemble_3d(mesh: &PrismMesh, sample: &FieldSample, bc: &RodBC, h: f64) -> Result<System3D> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(invalid(format!("thickness h must lie in (0, 1], got {h}")));
    }
    bc.validate()?;
    if (bc.length - mesh.length).abs() > 1e-12 * mesh.length {
        return Err(invalid("mesh length differs from rod length"));
    }
    if mesh.n_layers < 2 {
        return Err(invalid("3D model needs at least two layers"));
    }
    let layers = layer_coefficients(mesh, sample)?;
    let dx = mesh.dx();
    let geoms: Vec<TriGeometry> = (0..mesh.section.n_triangles())
        .map(|t| mesh.section.geometry(t))
        .collect();
    // element matrices depend on the layer only through its coefficients
    let mut distinct: Vec<LayerCoefficients> = Vec::new();
    let mut slot = Vec::with_capacity(layers.len());
    for c in &layers {
        match distinct.iter().position(|d| d == c) {
            Some(i) => slot.push(i),
            None => {
                slot.push(distinct.len());
                distinct.push(*c);
            }
        }
    }
    let cache: Vec<Vec<WedgeMatrix>> = distinct
        .par_iter()
        .map(|c| {
            geoms
                .iter()
                .map(|g| element_matrix(g, dx, c, h, mesh.length))
                .collect()
        })
        .collect();
    let mut full = full_pattern(mesh);
    let nt = mesh.section.n_triangles();
    for e in 0..mesh.n_elements() {
        let ke = &cache[slot[e / nt]][e % nt];
        let nodes = mesh.element_nodes(e);
        for p in 0..6 {
            for i in 0..3 {
                let row = 3 * nodes[p] + i;
                for q in 0..6 {
                    for k in 0..3 {
                        full.add(row, 3 * nodes[q] + k, ke[3 * p + i][3 * q + k]);
                    }
                }
            }
        }
    }
    let lift = dirichlet_lift(mesh, bc, h, sample.phi_mean());
    let kl = full.matvec(&lift);
    let lift_energy = dot(&lift, &kl);
    let (lo, hi) = free_range(mesh);
    let rhs = kl[lo..hi].iter().map(|v| -v).collect();
    let reduced = restrict(&full, lo, hi);
    Ok(System3D {
        mesh: mesh.clone(),
        h,
        layers,
        full,
        lift,
        reduced,
        rhs,
        lift_energy,
    })
}

fn free_range(mesh: &PrismMesh) -> (usize, usize) {
    let ns = mesh.n_section_nodes();
    (3 * ns, 3 * ns * mesh.n_layers)
}

impl System3D {
    /// `xᵀKx` of a full displacement.
    pub fn energy(&self, u: &Displacement3D) -> f64 {
        let x = u.to_dofs();
        dot(&x, &self.full.matvec(&x))
    }

    /// Lift plus interior correction.
    pub fn compose(&self, interior: &[f64]) -> Displacement3D {
        let (lo, _) = free_range(&self.mesh);
        let mut x = self.lift.clone();
        for (i, v) in interior.iter().enumerate() {
            x[lo + i] += v;
        }
        Displacement3D::from_dofs(&x)
    }

    /// Largest deviation of `u` from the end data.
    pub fn dirichlet_defect(&self, u: &Displacement3D) -> f64 {
        let (lo, hi) = free_range(&self.mesh);
        let x = u.to_dofs();
        (0..lo)
            .chain(hi..x.len())
            .map(|i| (x[i] - self.lift[i]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn solve_3d(
    system: &System3D,
    tol: f64,
    max_iters: usize,
) -> Result<(Displacement3D, CgOutcome)> {
    let out = pcg_jacobi(&system.reduced, &system.rhs, tol, max_iters)?;
    Ok((system.compose(&out.x), out))
}

/// `E^{ε,h}(ω)` on the prism mesh built from `section` and `cfg`.
pub fn effective_modulus_3d(
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
    h: f64,
    cfg: &Solve3dConfig,
) -> Result<EnergyReport> {
    Ok(solve_with_energy_3d(section, sample, bc, h, cfg)?.2)
}

pub fn solve_with_energy_3d(
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
    h: f64,
    cfg: &Solve3dConfig,
) -> Result<(System3D, Displacement3D, EnergyReport)> {
    let meshed = meshed_section(section, cfg.rings)?;
    let mesh = build_prism_mesh(&meshed, cfg.n_layers, bc.length)?;
    let sys = assemble_3d(&mesh, sample, bc, h)?;
    let (u, out) = solve_3d(&sys, cfg.tol, cfg.max_iters)?;
    let value = sys.energy(&u);
    let report = EnergyReport {
        value,
        terms: None,
        iterations: out.iterations,
        residual: out.residual,
    };
    Ok((sys, u, report))
}

/// Admissible displacement built from a 1D state: `u₁ = ū + x₃r₂ − x₂r₃`,
/// in-plane rotation `r₁(−x₃, x₂)` plus the translation `v` with
/// `v' = (r₃, −r₂)/h + (−Φ₂, Φ₁)r₁/L` that removes the leading shear.
/// End layers carry the Dirichlet data, so the energy bounds `E^{ε,h}` from above.
pub fn recovery_ansatz(system: &System3D, state: &RodState1D) -> Result<Displacement3D> {
    let mesh = &system.mesh;
    let n1 = state.grid.len() - 1;
    if n1 == 0 || (state.grid[n1] - mesh.length).abs() > 1e-12 * mesh.length {
        return Err(invalid("1D state does not span the rod"));
    }
    let h1 = mesh.length / n1 as f64;
    let mut v = vec![[0.0; 2]; n1 + 1];
    for i in 0..n1 {
        let xm = (i as f64 + 0.5) * h1;
        let layer = ((xm / mesh.dx()) as usize).min(mesh.n_layers - 1);
        let phi = system.layers[layer].phi;
        let r = |k: usize| 0.5 * (state.r[i][k] + state.r[i + 1][k]);
        v[i + 1][0] = v[i][0] + h1 * (r(2) / system.h - phi[1] * r(0) / mesh.length);
        v[i + 1][1] = v[i][1] + h1 * (-r(1) / system.h + phi[0] * r(0) / mesh.length);
    }
    let interp = |x: f64, f: &dyn Fn(usize) -> f64| {
        let s = (x / h1).clamp(0.0, n1 as f64);
        let i = (s.floor() as usize).min(n1 - 1);
        let t = s - i as f64;
        (1.0 - t) * f(i) + t * f(i + 1)
    };
    let mut x = Vec::with_capacity(3 * mesh.n_nodes());
    for n in 0..mesh.n_nodes() {
        let [x1, x2, x3] = mesh.coords(n);
        let ub = interp(x1, &|i| state.u_bar[i]);
        let r: Vec<f64> = (0..3).map(|k| interp(x1, &|i| state.r[i][k])).collect();
        let v2 = interp(x1, &|i| v[i][0]);
        let v3 = interp(x1, &|i| v[i][1]);
        x.extend_from_slice(&[ub + x3 * r[1] - x2 * r[2], -r[0] * x3 + v2, r[0] * x2 + v3]);
    }
    let (lo, hi) = free_range(mesh);
    for i in (0..lo).chain(hi..x.len()) {
        x[i] = system.lift[i];
    }
    Ok(Displacement3D::from_dofs(&x))
}
