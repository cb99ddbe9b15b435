//! One-dimensional surrogate rod: P1 elements for `(ū, r₁, r₂, r₃)`, affine
//! end data and zero-mean flexural displacements.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::FieldSample;
use crate::geometry::{rod_stiffness, CrossSection};
use crate::linalg::{norm, BandedSym};

const DOF: usize = 4;

/// End conditions of the mechanical test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodBC {
    pub length: f64,
    /// End displacement of the face `x₁ = L`.
    pub t: [f64; 3],
    pub k0: f64,
    pub kl: f64,
    /// In-plane dilations at both ends; used by the 3D model only.
    pub a0: [[f64; 2]; 2],
    pub al: [[f64; 2]; 2],
}

impl RodBC {
    pub fn tension(length: f64, t1: f64) -> Self {
        Self {
            length,
            t: [t1, 0.0, 0.0],
            k0: 0.0,
            kl: 0.0,
            a0: [[0.0; 2]; 2],
            al: [[0.0; 2]; 2],
        }
    }

    pub fn with_twist(mut self, k0: f64, kl: f64) -> Self {
        self.k0 = k0;
        self.kl = kl;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(invalid(format!(
                "rod length must be positive, got {}",
                self.length
            )));
        }
        let all = self
            .t
            .iter()
            .chain([&self.k0, &self.kl])
            .chain(self.a0.iter().flatten())
            .chain(self.al.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("boundary data must be finite"));
        }
        Ok(())
    }

    /// `K = [[0, −k], [k, 0]]`
    pub fn k_matrix(k: f64) -> [[f64; 2]; 2] {
        [[0.0, -k], [k, 0.0]]
    }

    /// `t₁/L`, the affine stretch.
    pub fn stretch(&self) -> f64 {
        self.t[0] / self.length
    }

    /// `(k_L − k₀)/L`, the affine twist rate.
    pub fn twist_rate(&self) -> f64 {
        (self.kl - self.k0) / self.length
    }

    /// Same data multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let m = |a: [[f64; 2]; 2]| a.map(|r| r.map(|v| c * v));
        Self {
            length: self.length,
            t: self.t.map(|v| c * v),
            k0: c * self.k0,
            kl: c * self.kl,
            a0: m(self.a0),
            al: m(self.al),
        }
    }
}

/// Stretch, twist and the two bending contributions to an energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    pub stretch: f64,
    pub twist: f64,
    /// Curvature `r₂'` term (weighted by `∫x₃²`).
    pub bend2: f64,
    /// Curvature `r₃'` term (weighted by `∫x₂²`).
    pub bend3: f64,
}

impl EnergyTerms {
    pub fn sum(&self) -> f64 {
        self.stretch + self.twist + self.bend2 + self.bend3
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub value: f64,
    pub terms: Option<EnergyTerms>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RodState1D {
    pub grid: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub r: Vec<[f64; 3]>,
    /// Multipliers of the `⨍r₂ = 0`, `⨍r₃ = 0` constraints.
    pub multipliers: [f64; 2],
}

impl RodState1D {
    pub fn from_dofs(grid: Vec<f64>, x: &[f64], multipliers: [f64; 2]) -> Self {
        let n = grid.len();
        let u_bar = (0..n).map(|i| x[DOF * i]).collect();
        let r = (0..n)
            .map(|i| [x[DOF * i + 1], x[DOF * i + 2], x[DOF * i + 3]])
            .collect();
        Self {
            grid,
            u_bar,
            r,
            multipliers,
        }
    }

    pub fn to_dofs(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(DOF * self.grid.len());
        for (u, r) in self.u_bar.iter().zip(&self.r) {
            x.extend_from_slice(&[*u, r[0], r[1], r[2]]);
        }
        x
    }

    /// `(⨍r₂, ⨍r₃)` by the trapezoidal rule, exact for P1.
    pub fn flexural_means(&self) -> [f64; 2] {
        let n = self.grid.len();
        let length = self.grid[n - 1] - self.grid[0];
        let mut m = [0.0; 2];
        for i in 0..n - 1 {
            let h = self.grid[i + 1] - self.grid[i];
            for k in 0..2 {
                m[k] += 0.5 * h * (self.r[i][k + 1] + self.r[i + 1][k + 1]);
            }
        }
        m.map(|v| v / length)
    }

    /// Writes `x1, u_bar, r1, r2, r3`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x1,u_bar,r1,r2,r3")?;
        for i in 0..self.grid.len() {
            let r = self.r[i];
            writeln!(
                f,
                "{},{},{},{},{}",
                self.grid[i], self.u_bar[i], r[0], r[1], r[2]
            )?;
        }
        Ok(())
    }
}

/// Assembled discrete problem: per-element coefficients and the banded matrix.
#[derive(Clone, Debug)]
pub struct Rod1dSystem {
    pub n_elements: usize,
    pub length: f64,
    /// `(a|S|, μJ, a∫x₃², a∫x₂²)` per element.
    pub stiffness: Vec<[f64; 4]>,
    /// `(Φ₁, Φ₂)` per element.
    pub phi: Vec<[f64; 2]>,
    pub bc: RodBC,
    /// Full stiffness on all `4(N+1)` nodal dofs; energy is `xᵀKx`.
    pub matrix: BandedSym,
    /// Set when the correlation length spans fewer than four elements.
    pub under_resolved: bool,
}

/// `ξ_t = d_t · (x_i, x_{i+1})` on one element.
fn strain_rows(h: f64, length: f64, phi: [f64; 2]) -> [[f64; 8]; 4] {
    let mut d = [[0.0; 8]; 4];
    for t in 0..4 {
        d[t][t] = -1.0 / h;
        d[t][DOF + t] = 1.0 / h;
    }
    // (r₃Φ₁ − r₂Φ₂)/L at the midpoint
    for node in 0..2 {
        d[0][DOF * node + 3] += 0.5 * phi[0] / length;
        d[0][DOF * node + 2] -= 0.5 * phi[1] / length;
    }
    d
}

impl Rod1dSystem {
    /// Assembles from per-element coefficients.
    pub fn from_coefficients(
        stiffness: Vec<[f64; 4]>,
        phi: Vec<[f64; 2]>,
        bc: &RodBC,
    ) -> Result<Self> {
        bc.validate()?;
        let n = stiffness.len();
        if n < 4 {
            return Err(invalid(format!("need at least 4 elements, got {n}")));
        }
        if phi.len() != n {
            return Err(invalid("coefficient and perturbation lengths differ"));
        }
        if stiffness
            .iter()
            .flatten()
            .any(|c| !(*c > 0.0) || !c.is_finite())
        {
            return Err(Error::Assembly("non-positive rod stiffness".into()));
        }
        let (length, h) = (bc.length, bc.length / n as f64);
        let mut k = BandedSym::zeros(DOF * (n + 1), 2 * DOF - 1);
        for e in 0..n {
            let d = strain_rows(h, length, phi[e]);
            for t in 0..4 {
                let c = stiffness[e][t] * h / length;
                for p in 0..8 {
                    if d[t][p] == 0.0 {
                        continue;
                    }
                    for q in 0..=p {
                        let v = c * d[t][p] * d[t][q];
                        if v != 0.0 {
                            k.add(DOF * e + p, DOF * e + q, v);
                        }
                    }
                }
            }
        }
        Ok(Self {
            n_elements: n,
            length,
            stiffness,
            phi,
            bc: bc.clone(),
            matrix: k,
            under_resolved: false,
        })
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n_elements).map(|i| i as f64 * h).collect()
    }

    /// Affine lift `(t₁x₁/L, k₀ + (k_L−k₀)x₁/L, 0, 0)` at all nodes.
    pub fn affine_lift(&self) -> Vec<f64> {
        let mut x = vec![0.0; DOF * (self.n_elements + 1)];
        for (i, s) in self.grid().into_iter().enumerate() {
            x[DOF * i] = self.bc.t[0] * s / self.length;
            x[DOF * i + 1] = self.bc.k0 + (self.bc.kl - self.bc.k0) * s / self.length;
        }
        x
    }

    /// Weights `w` with `⨍r_k = Σ w_i r_k(x_i)`.
    pub fn mean_weights(&self) -> Vec<f64> {
        let n = self.n_elements;
        (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    0.5 / n as f64
                } else {
                    1.0 / n as f64
                }
            })
            .collect()
    }

    /// Energy of an arbitrary nodal vector, split by term.
    pub fn energy_terms(&self, x: &[f64]) -> EnergyTerms {
        let h = self.h();
        let mut acc = [0.0; 4];
        for e in 0..self.n_elements {
            let d = strain_rows(h, self.length, self.phi[e]);
            let xe = &x[DOF * e..DOF * e + 2 * DOF];
            for t in 0..4 {
                let xi: f64 = d[t].iter().zip(xe).map(|(a, b)| a * b).sum();
                acc[t] += self.stiffness[e][t] * xi * xi * h / self.length;
            }
        }
        EnergyTerms {
            stretch: acc[0],
            twist: acc[1],
            bend2: acc[2],
            bend3: acc[3],
        }
    }

    pub fn energy_dofs(&self, x: &[f64]) -> f64 {
        self.energy_terms(x).sum()
    }

    /// Interior block, right-hand side and the two constraint rows.
    fn reduced(&self) -> (BandedSym, Vec<f64>, [Vec<f64>; 2]) {
        let n = self.n_elements;
        let m = DOF * (n - 1);
        let bw = self.matrix.half_bandwidth();
        let mut kii = BandedSym::zeros(m, bw);
        for i in 0..m {
            for j in i.saturating_sub(bw)..=i {
                let v = self.matrix.get(DOF + i, DOF + j);
                if v != 0.0 {
                    kii.add(i, j, v);
                }
            }
        }
        let kx = self.matrix.matvec(&self.affine_lift());
        let f: Vec<f64> = kx[DOF..DOF * n].iter().map(|v| -v).collect();
        let w = self.mean_weights();
        let mut c = [vec![0.0; m], vec![0.0; m]];
        for i in 1..n {
            c[0][DOF * (i - 1) + 2] = w[i];
            c[1][DOF * (i - 1) + 3] = w[i];
        }
        (kii, f, c)
    }

    /// Bordered banded solve of the constrained minimization.
    pub fn solve(&self) -> Result<(RodState1D, f64)> {
        let n = self.n_elements;
        let (kii, f, c) = self.reduced();
        let chol = kii
            .clone()
            .cholesky()
            .map_err(|e| Error::Solve(format!("1D stiffness: {e}")))?;
        let y = chol.solve(&f);
        let z = [chol.solve(&c[0]), chol.solve(&c[1])];
        // Schur complement S λ = C K⁻¹ f
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let s = [
            [dot(&c[0], &z[0]), dot(&c[0], &z[1])],
            [dot(&c[1], &z[0]), dot(&c[1], &z[1])],
        ];
        let g = [dot(&c[0], &y), dot(&c[1], &y)];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(det.abs() > 0.0) {
            return Err(Error::Solve("singular constraint block".into()));
        }
        let lam = [
            (g[0] * s[1][1] - g[1] * s[0][1]) / det,
            (s[0][0] * g[1] - s[1][0] * g[0]) / det,
        ];
        let w: Vec<f64> = (0..y.len())
            .map(|i| y[i] - lam[0] * z[0][i] - lam[1] * z[1][i])
            .collect();

        // residual of the full saddle-point system
        let mut r = kii.matvec(&w);
        for i in 0..r.len() {
            r[i] += lam[0] * c[0][i] + lam[1] * c[1][i] - f[i];
        }
        let scale = norm(&f)
            .max(kii.max_abs() * norm(&w))
            .max(f64::MIN_POSITIVE);
        let residual =
            (norm(&r).powi(2) + dot(&c[0], &w).powi(2) + dot(&c[1], &w).powi(2)).sqrt() / scale;
        if !(residual <= 1e-10) {
            return Err(Error::Solve(format!(
                "1D residual {residual:e} above 1e-10"
            )));
        }

        let mut x = self.affine_lift();
        for i in 0..w.len() {
            x[DOF + i] += w[i];
        }
        // multipliers of the energy xᵀKx: gradient 2Kx + Cᵀμ = 0
        let state = RodState1D::from_dofs(self.grid(), &x, [2.0 * lam[0], 2.0 * lam[1]]);
        debug_assert_eq!(state.grid.len(), n + 1);
        Ok((state, residual))
    }

    pub fn energy_report(&self, state: &RodState1D, residual: f64) -> EnergyReport {
        let terms = self.energy_terms(&state.to_dofs());
        EnergyReport {
            value: terms.sum(),
            terms: Some(terms),
            iterations: 1,
            residual,
        }
    }
}

/// Per-element coefficients from a section and a field sample.
fn sample_coefficients(
    section: &CrossSection,
    sample: &FieldSample,
    n: usize,
) -> Result<(Vec<[f64; 4]>, Vec<[f64; 2]>)> {
    sample.validate()?;
    let cells = sample.n_cells();
    if n % cells != 0 {
        return Err(invalid(format!(
            "element count {n} is not a multiple of the {cells} field cells"
        )));
    }
    let per = n / cells;
    let mut stiffness = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for e in 0..n {
        let c = e / per;
        stiffness.push(rod_stiffness(section, &sample.material(c)));
        phi.push([sample.phi1[c], sample.phi2[c]]);
    }
    Ok((stiffness, phi))
}

pub fn assemble_1d(
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
    n: usize,
) -> Result<Rod1dSystem> {
    if (sample.length - bc.length).abs() > 1e-12 * bc.length {
        return Err(invalid("sample length differs from rod length"));
    }
    let (stiffness, phi) = sample_coefficients(section, sample, n)?;
    let mut sys = Rod1dSystem::from_coefficients(stiffness, phi, bc)?;
    sys.under_resolved = sample.under_resolved || sample.eps < 4.0 * bc.length / n as f64;
    Ok(sys)
}

pub fn solve_1d(system: &Rod1dSystem) -> Result<RodState1D> {
    Ok(system.solve()?.0)
}

/// Energy `⨍ Q^rod(ξ)` of any nodal state.
pub fn energy_1d(
    state: &RodState1D,
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
) -> Result<EnergyReport> {
    let n = state.grid.len() - 1;
    let sys = assemble_1d(section, sample, bc, n)?;
    let terms = sys.energy_terms(&state.to_dofs());
    Ok(EnergyReport {
        value: terms.sum(),
        terms: Some(terms),
        iterations: 0,
        residual: 0.0,
    })
}

/// `E^ε(ω)`: the discrete minimum.
pub fn effective_modulus_1d(
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
    n: usize,
) -> Result<EnergyReport> {
    let sys = assemble_1d(section, sample, bc, n)?;
    let (state, residual) = sys.solve()?;
    Ok(sys.energy_report(&state, residual))
}

/// Minimizer together with its energy.
pub fn solve_with_energy(
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
    n: usize,
) -> Result<(RodState1D, EnergyReport)> {
    let sys = assemble_1d(section, sample, bc, n)?;
    let (state, residual) = sys.solve()?;
    let report = sys.energy_report(&state, residual);
    Ok((state, report))
}
