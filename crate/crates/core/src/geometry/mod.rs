//! Cross-sections, torsion and the rod quadratic form.

pub mod mesh2d;
pub mod relaxation;
pub mod torsion;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use mesh2d::{Moments, TriGeometry, TriMesh};
pub use relaxation::{q_rod_relaxation, ElasticityTensor, Relaxation};
pub use torsion::{solve_torsion_function, TorsionSolution};

/// Centering tolerance for analytic sections.
pub const TOL_GEOM_ANALYTIC: f64 = 1e-10;
/// Centering tolerance for meshed sections.
pub const TOL_GEOM_MESHED: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionKind {
    Disc { radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Clone, Debug)]
pub struct CrossSection {
    pub kind: SectionKind,
    pub area: f64,
    /// `∫x₂²`
    pub i2: f64,
    /// `∫x₃²`
    pub i3: f64,
    pub j: f64,
    pub mesh: Option<TriMesh>,
    /// Torsion function at mesh nodes; absent means identically zero.
    pub phi_aff: Option<Vec<f64>>,
    first: [f64; 2],
    i23: f64,
    diam: f64,
}

impl CrossSection {
    pub fn diameter(&self) -> f64 {
        self.diam
    }

    /// `(∫x₂, ∫x₃, ∫x₂x₃)` as stored.
    pub fn centering_moments(&self) -> [f64; 3] {
        [self.first[0], self.first[1], self.i23]
    }

    pub fn check_centering(&self, tol_geom: f64) -> Result<()> {
        let bound = tol_geom * self.area * self.diam * self.diam;
        for (name, v) in ["∫x₂", "∫x₃", "∫x₂x₃"].iter().zip(self.centering_moments())
        {
            if v.abs() > bound {
                return Err(Error::InvalidGeometry(format!(
                    "section not centered: {name} = {v:e} exceeds {bound:e}"
                )));
            }
        }
        Ok(())
    }

    fn check_positive(&self) -> Result<()> {
        for (name, v) in [
            ("area", self.area),
            ("I2", self.i2),
            ("I3", self.i3),
            ("J", self.j),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidGeometry(format!(
                    "{name} = {v} is not positive"
                )));
            }
        }
        Ok(())
    }

    fn from_mesh(kind: SectionKind, mesh: TriMesh) -> Result<Self> {
        let m = mesh.moments();
        let torsion = solve_torsion_function(&mesh)?;
        let s = CrossSection {
            kind,
            area: m.area,
            i2: m.second[0],
            i3: m.second[1],
            j: torsion.j,
            diam: mesh.diameter(),
            first: m.first,
            i23: m.second[2],
            phi_aff: Some(torsion.phi),
            mesh: Some(mesh),
        };
        s.check_positive()?;
        s.check_centering(TOL_GEOM_MESHED)?;
        Ok(s)
    }
}

/// Exact disc of radius `r`; the torsion function vanishes.
pub fn make_disc(r: f64) -> Result<CrossSection> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("disc radius must be positive, got {r}")));
    }
    let i = PI * r.powi(4) / 4.0;
    Ok(CrossSection {
        kind: SectionKind::Disc { radius: r },
        area: PI * r * r,
        i2: i,
        i3: i,
        j: 2.0 * i,
        mesh: None,
        phi_aff: None,
        first: [0.0; 2],
        i23: 0.0,
        diam: 2.0 * r,
    })
}

/// Disc meshed by `rings` concentric rings; moments and `J` come from the mesh.
pub fn make_disc_mesh(r: f64, rings: usize) -> Result<CrossSection> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("disc radius must be positive, got {r}")));
    }
    CrossSection::from_mesh(SectionKind::Disc { radius: r }, TriMesh::disc(r, rings)?)
}

/// Simple polygon, translated to its centroid and rotated to principal axes,
/// then meshed to edge length `target_h`.
pub fn make_polygon_section(vertices: &[[f64; 2]], target_h: f64) -> Result<CrossSection> {
    if vertices.len() < 3 {
        return Err(invalid("polygon needs at least 3 vertices"));
    }
    if vertices.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("polygon has non-finite vertices"));
    }
    if !(target_h > 0.0) {
        return Err(invalid(format!(
            "mesh size must be positive, got {target_h}"
        )));
    }
    if mesh2d::polygon_self_intersects(vertices) {
        return Err(invalid("polygon is self-intersecting"));
    }
    let mut v = vertices.to_vec();
    let signed = mesh2d::polygon_signed_area(&v);
    if signed == 0.0 {
        return Err(invalid("polygon has zero area"));
    }
    if signed < 0.0 {
        v.reverse();
    }
    let coarse = TriMesh::from_polygon(&v)?;
    let m = coarse.moments();
    let c = [m.first[0] / m.area, m.first[1] / m.area];
    let i22 = m.second[0] - m.area * c[0] * c[0];
    let i33 = m.second[1] - m.area * c[1] * c[1];
    let i23 = m.second[2] - m.area * c[0] * c[1];
    let theta = 0.5 * (2.0 * i23).atan2(i22 - i33);
    let (sn, cs) = theta.sin_cos();
    let placed: Vec<[f64; 2]> = v
        .iter()
        .map(|p| {
            let (x, y) = (p[0] - c[0], p[1] - c[1]);
            [cs * x + sn * y, -sn * x + cs * y]
        })
        .collect();
    let mesh = TriMesh::from_polygon(&placed)?.refine_to(target_h);
    CrossSection::from_mesh(
        SectionKind::Polygon {
            vertices: vertices.to_vec(),
        },
        mesh,
    )
}

/// Homogeneous isotropic material at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicMaterial {
    pub mu: f64,
    pub lambda: f64,
}

impl IsotropicMaterial {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() || !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid(format!(
                "need mu > 0 and lambda >= 0, got mu={mu}, lambda={lambda}"
            )));
        }
        Ok(Self { mu, lambda })
    }

    /// Axial modulus `a = μ(3λ+2μ)/(λ+μ)`.
    pub fn a(&self) -> f64 {
        axial_modulus(self.mu, self.lambda)
    }

    pub fn tensor(&self) -> Result<ElasticityTensor> {
        ElasticityTensor::isotropic(self.mu, self.lambda)
    }
}

#[inline]
pub fn axial_modulus(mu: f64, lambda: f64) -> f64 {
    mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu)
}

/// `(ξ₁ stretch, ξ₂ twist, ξ₃, ξ₄ curvatures)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RodStrain(pub [f64; 4]);

impl RodStrain {
    pub fn new(xi: [f64; 4]) -> Result<Self> {
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(invalid("rod strain has non-finite entries"));
        }
        Ok(Self(xi))
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

/// Diagonal of `A` in `Q^rod(ξ) = Aξ·ξ`: `(a|S|, μJ, aI3, aI2)`.
pub fn rod_stiffness(section: &CrossSection, mat: &IsotropicMaterial) -> [f64; 4] {
    let a = mat.a();
    [
        a * section.area,
        mat.mu * section.j,
        a * section.i3,
        a * section.i2,
    ]
}

pub fn q_rod_closed_form(section: &CrossSection, mat: &IsotropicMaterial, xi: &RodStrain) -> f64 {
    rod_stiffness(section, mat)
        .iter()
        .zip(xi.0)
        .map(|(c, x)| c * x * x)
        .sum()
}

/// `(β₁, β₂)` with `β₁|ξ|² ≤ Q^rod(ξ) ≤ β₂|ξ|²`.
pub fn coercivity_bounds(section: &CrossSection, mat: &IsotropicMaterial) -> (f64, f64) {
    let d = rod_stiffness(section, mat);
    (
        d.iter().copied().fold(f64::INFINITY, f64::min),
        d.iter().copied().fold(0.0, f64::max),
    )
}
