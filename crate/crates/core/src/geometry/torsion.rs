//! Warping (torsion) function of a cross-section by P1 finite elements.

use super::mesh2d::{TriMesh, EDGE_MIDPOINT_RULE};
use crate::error::{Error, Result};
use crate::linalg::{pcg_jacobi, CsrMatrix};

#[derive(Clone, Debug)]
pub struct TorsionSolution {
    /// Nodal values with zero mean over the section.
    pub phi: Vec<f64>,
    pub j: f64,
    pub cg_iterations: usize,
}

/// Solves `−Δφ = 0`, `∂_νφ = (x₃, −x₂)·ν` with `∫φ = 0`, and returns
/// `J = ∫ (x₃ − ∂₂φ)² + (x₂ + ∂₃φ)²`.
pub fn solve_torsion_function(mesh: &TriMesh) -> Result<TorsionSolution> {
    mesh.validate()?;
    check_connected(mesh)?;
    let n = mesh.n_nodes();
    let mut k = CsrMatrix::from_pattern(mesh.node_adjacency());
    let mut rhs = vec![0.0; n];
    let mut lumped = vec![0.0; n];
    for t in 0..mesh.n_triangles() {
        let g = mesh.geometry(t);
        let c = g.centroid();
        let tri = mesh.triangles[t];
        for a in 0..3 {
            rhs[tri[a]] += g.area * (c[1] * g.grad[a][0] - c[0] * g.grad[a][1]);
            lumped[tri[a]] += g.area / 3.0;
            for b in 0..3 {
                let v = g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
                k.add(tri[a], tri[b], v);
            }
        }
    }
    // remove the roundoff component along the constant null vector
    let shift = rhs.iter().sum::<f64>() / n as f64;
    rhs.iter_mut().for_each(|r| *r -= shift);

    let out = pcg_jacobi(&k, &rhs, 1e-12, 20 * n + 100).map_err(|e| match e {
        Error::NotConverged { .. } | Error::Solve(_) => {
            Error::MeshQuality(format!("torsion system is singular beyond constants: {e}"))
        }
        other => other,
    })?;
    let mut phi = out.x;
    let area: f64 = lumped.iter().sum();
    let mean = phi.iter().zip(&lumped).map(|(p, m)| p * m).sum::<f64>() / area;
    phi.iter_mut().for_each(|p| *p -= mean);

    let j = torsion_integral(mesh, &phi);
    if !(j > 0.0) {
        return Err(Error::MeshQuality(format!(
            "non-positive torsion constant {j:e}"
        )));
    }
    Ok(TorsionSolution {
        phi,
        j,
        cg_iterations: out.iterations,
    })
}

/// `∫ |(x₃, −x₂) − ∇φ|²` for a nodal P1 field.
pub fn torsion_integral(mesh: &TriMesh, phi: &[f64]) -> f64 {
    let mut j = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = mesh.geometry(t);
        let tri = mesh.triangles[t];
        let mut grad = [0.0; 2];
        for a in 0..3 {
            grad[0] += phi[tri[a]] * g.grad[a][0];
            grad[1] += phi[tri[a]] * g.grad[a][1];
        }
        for (bary, w) in EDGE_MIDPOINT_RULE {
            let p = g.point(&bary);
            j += w * g.area * ((p[1] - grad[0]).powi(2) + (-p[0] - grad[1]).powi(2));
        }
    }
    j
}

/// `∮ (x₃, −x₂)·ν ds`, zero on closed boundaries.
pub fn neumann_flux(mesh: &TriMesh) -> f64 {
    mesh.boundary_edges()
        .iter()
        .map(|&[a, b]| {
            let (p, q) = (mesh.nodes[a], mesh.nodes[b]);
            let m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let d = [q[0] - p[0], q[1] - p[1]];
            // outward normal times length is (d₃, −d₂)
            m[1] * d[1] + m[0] * d[0]
        })
        .sum()
}

fn check_connected(mesh: &TriMesh) -> Result<()> {
    let adj = mesh.node_adjacency();
    let mut seen = vec![false; mesh.n_nodes()];
    let mut stack = vec![mesh.triangles[0][0]];
    seen[stack[0]] = true;
    while let Some(a) = stack.pop() {
        for &b in &adj[a] {
            if !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::MeshQuality(
            "section mesh is disconnected or has unused nodes".into(),
        ));
    }
    Ok(())
}
