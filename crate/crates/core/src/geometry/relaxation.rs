//! Numeric relaxation of the rod quadratic form over section warping fields.

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, SymmetricEigen};

use super::mesh2d::{TriMesh, EDGE_MIDPOINT_RULE};
use super::RodStrain;
use crate::error::{Error, Result};

type M9 = SMatrix<f64, 9, 9>;
type V9 = SMatrix<f64, 9, 1>;

/// Fourth-order tensor acting on 3×3 matrices, flattened row-major (`ij → 3i + j`).
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticityTensor {
    c: M9,
}

impl ElasticityTensor {
    pub fn isotropic(mu: f64, lambda: f64) -> Result<Self> {
        Self::from_fn(|i, j, k, l| {
            let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k)) + lambda * d(i, j) * d(k, l)
        })
    }

    /// Builds `L_ijkl` from a component function; the result is validated.
    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut c = M9::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        c[(3 * i + j, 3 * k + l)] = f(i, j, k, l);
                    }
                }
            }
        }
        let t = Self { c };
        t.validate()?;
        Ok(t)
    }

    /// Symmetric projection `P L P` with `P F = sym F`.
    fn on_symmetric(&self) -> M9 {
        let mut p = M9::zeros();
        for i in 0..3 {
            for j in 0..3 {
                p[(3 * i + j, 3 * i + j)] += 0.5;
                p[(3 * i + j, 3 * j + i)] += 0.5;
            }
        }
        p * self.c * p
    }

    /// Major symmetry and positive definiteness on symmetric matrices.
    pub fn validate(&self) -> Result<()> {
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "elasticity tensor has non-finite entries".into(),
            ));
        }
        let scale = self.c.amax().max(f64::MIN_POSITIVE);
        if (self.c - self.c.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument(
                "elasticity tensor lacks major symmetry".into(),
            ));
        }
        // orthonormal basis of symmetric 3×3 matrices
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = Vec::with_capacity(6);
        for i in 0..3 {
            let mut e = V9::zeros();
            e[3 * i + i] = 1.0;
            basis.push(e);
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut e = V9::zeros();
            e[3 * i + j] = s;
            e[3 * j + i] = s;
            basis.push(e);
        }
        let m =
            nalgebra::Matrix6::from_fn(|a, b| (basis[a].transpose() * self.c * basis[b])[(0, 0)]);
        let eig = SymmetricEigen::new(m);
        let min = eig.eigenvalues.min();
        if !(min > 1e-12 * scale) {
            return Err(Error::InvalidArgument(format!(
                "elasticity tensor is not positive definite on symmetric matrices (min eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    /// `Q(F) = sym F : L : sym F`.
    pub fn quadratic(&self, f: &[[f64; 3]; 3]) -> f64 {
        let v = V9::from_fn(|k, _| f[k / 3][k % 3]);
        let s = self.on_symmetric();
        (v.transpose() * s * v)[(0, 0)]
    }
}

/// Factorized relaxation problem for one mesh and tensor; answers any `ξ`.
pub struct Relaxation {
    mesh: TriMesh,
    s: M9,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Right-hand side per unit strain direction.
    loads: [DVector<f64>; 4],
    /// `∫ C_k : S : C_l` with φ = 0.
    unrelaxed: Matrix4<f64>,
    n_dof: usize,
}

/// First column of the strain at `x̄ = (x₂, x₃)` for unit strain direction `k`.
fn strain_column(k: usize, x: [f64; 2]) -> [f64; 3] {
    match k {
        0 => [1.0, 0.0, 0.0],
        1 => [0.0, -x[1], x[0]],
        2 => [x[1], 0.0, 0.0],
        _ => [-x[0], 0.0, 0.0],
    }
}

fn column_vec(c: [f64; 3]) -> V9 {
    let mut v = V9::zeros();
    for i in 0..3 {
        v[3 * i] = c[i];
    }
    v
}

impl Relaxation {
    pub fn new(mesh: &TriMesh, tensor: &ElasticityTensor) -> Result<Self> {
        mesh.validate()?;
        tensor.validate()?;
        let s = tensor.on_symmetric();
        let n = mesh.n_nodes();
        let n_dof = 3 * n;
        let dim = n_dof + 4;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        let mut loads: [DVector<f64>; 4] = std::array::from_fn(|_| DVector::zeros(dim));
        let mut unrelaxed = Matrix4::zeros();

        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            let tri = mesh.triangles[t];
            // G(a, i) = e_i ⊗ ∇N_a in columns 1, 2
            let shape = |a: usize, i: usize| {
                let mut v = V9::zeros();
                v[3 * i + 1] = g.grad[a][0];
                v[3 * i + 2] = g.grad[a][1];
                v
            };
            let sg: Vec<V9> = (0..9).map(|q| s * shape(q / 3, q % 3)).collect();
            for p in 0..9 {
                let gp = shape(p / 3, p % 3);
                let row = 3 * tri[p / 3] + p % 3;
                for q in 0..9 {
                    let col = 3 * tri[q / 3] + q % 3;
                    k[(row, col)] += g.area * gp.dot(&sg[q]);
                }
                for kk in 0..4 {
                    let c_mean = column_vec(strain_column(kk, g.centroid()));
                    loads[kk][row] -= g.area * c_mean.dot(&sg[p]);
                }
            }
            for (bary, w) in EDGE_MIDPOINT_RULE {
                let x = g.point(&bary);
                for a in 0..4 {
                    let ca = column_vec(strain_column(a, x));
                    for b in 0..4 {
                        let cb = column_vec(strain_column(b, x));
                        unrelaxed[(a, b)] += w * g.area * ca.dot(&(s * cb));
                    }
                }
            }
            // constraints: ∫φ_i = 0 and ∫(x₂φ₃ − x₃φ₂) = 0
            let sum_x: [f64; 2] = [0, 1].map(|c| g.coords.iter().map(|p| p[c]).sum());
            for a in 0..3 {
                let node = tri[a];
                for i in 0..3 {
                    k[(n_dof + i, 3 * node + i)] += g.area / 3.0;
                    k[(3 * node + i, n_dof + i)] += g.area / 3.0;
                }
                let xn = [0, 1].map(|c| g.area / 12.0 * (g.coords[a][c] + sum_x[c]));
                k[(n_dof + 3, 3 * node + 2)] += xn[0];
                k[(3 * node + 2, n_dof + 3)] += xn[0];
                k[(n_dof + 3, 3 * node + 1)] -= xn[1];
                k[(3 * node + 1, n_dof + 3)] -= xn[1];
            }
        }
        let lu = k.lu();
        if !lu.is_invertible() {
            return Err(Error::MeshQuality("relaxation system is singular".into()));
        }
        Ok(Self {
            mesh: mesh.clone(),
            s,
            lu,
            loads,
            unrelaxed,
            n_dof,
        })
    }

    /// Minimizing warping field (nodal 3-vectors, flattened) for strain `ξ`.
    pub fn minimizer(&self, xi: &RodStrain) -> Result<Vec<f64>> {
        let mut rhs = DVector::zeros(self.n_dof + 4);
        for k in 0..4 {
            rhs += &self.loads[k] * xi.0[k];
        }
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Solve("relaxation LU solve failed".into()))?;
        Ok(sol.rows(0, self.n_dof).iter().copied().collect())
    }

    /// `∫_S Q` for a given warping field.
    pub fn energy_at(&self, xi: &RodStrain, phi: &[f64]) -> f64 {
        let mut e = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let g = self.mesh.geometry(t);
            let tri = self.mesh.triangles[t];
            let mut grad = V9::zeros();
            for a in 0..3 {
                for i in 0..3 {
                    let v = phi[3 * tri[a] + i];
                    grad[3 * i + 1] += v * g.grad[a][0];
                    grad[3 * i + 2] += v * g.grad[a][1];
                }
            }
            for (bary, w) in EDGE_MIDPOINT_RULE {
                let x = g.point(&bary);
                let mut f = grad;
                for k in 0..4 {
                    f += column_vec(strain_column(k, x)) * xi.0[k];
                }
                e += w * g.area * f.dot(&(self.s * f));
            }
        }
        e
    }

    /// Relaxed quadratic form `Q^rod(ξ)`.
    pub fn value(&self, xi: &RodStrain) -> Result<f64> {
        let phi = self.minimizer(xi)?;
        Ok(self.energy_at(xi, &phi))
    }

    /// Value at `φ = 0`, an upper bound for [`Relaxation::value`].
    pub fn unrelaxed_value(&self, xi: &RodStrain) -> f64 {
        let v = nalgebra::Vector4::from_column_slice(&xi.0);
        (v.transpose() * self.unrelaxed * v)[(0, 0)]
    }

    /// Matrix `A` with `Q^rod(ξ) = Aξ·ξ`, from one factorization.
    pub fn matrix(&self) -> Result<Matrix4<f64>> {
        let mut a = self.unrelaxed;
        let sols: Vec<DVector<f64>> = (0..4)
            .map(|k| {
                self.lu
                    .solve(&self.loads[k])
                    .ok_or_else(|| Error::Solve("relaxation LU solve failed".into()))
            })
            .collect::<Result<_>>()?;
        // minimum value is c + fᵀφ with f = −load
        for i in 0..4 {
            for j in 0..4 {
                let v = -self.loads[i]
                    .rows(0, self.n_dof)
                    .dot(&sols[j].rows(0, self.n_dof));
                a[(i, j)] += v;
            }
        }
        Ok((a + a.transpose()) * 0.5)
    }
}

/// One-shot relaxation of `Q^rod(ξ)` on a meshed section.
pub fn q_rod_relaxation(mesh: &TriMesh, tensor: &ElasticityTensor, xi: &RodStrain) -> Result<f64> {
    Relaxation::new(mesh, tensor)?.value(xi)
}
