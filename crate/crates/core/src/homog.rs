//! Homogenized proxy, RVE coefficients, correctors and `ε`-rate sweeps.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector4};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fields::{
    sample_seed, stream_rng, FieldSample, FieldSampler, FieldSpec, LambdaLaw, MaterialModel,
    STREAM_LAMBDA, STREAM_MU,
};
use crate::geometry::{axial_modulus, rod_stiffness, CrossSection, IsotropicMaterial};
use crate::rod1d::{EnergyReport, Rod1dSystem, RodBC, RodState1D};
use crate::stats::{fit_loglog, l2_error, mean, LogLogFit};

/// Length of the auxiliary path for ergodic averages, in correlation lengths.
pub const ERGODIC_LENGTH_FACTOR: f64 = 1.0e4;
const ERGODIC_SEED: u64 = 0x0E60_D1C5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeanSource {
    Analytic,
    /// Long-path spatial average with this many cells.
    Ergodic {
        cells: usize,
    },
    /// Spatial average of a single sample.
    Sample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizedCoefficients {
    pub a_hom: f64,
    pub mu_hom: f64,
    pub mean_phi: [f64; 2],
    /// `A⁰` with `Q⁰(ξ) = A⁰ξ·ξ`.
    pub a0_matrix: Matrix4<f64>,
    pub source: MeanSource,
}

impl HomogenizedCoefficients {
    pub fn new(
        section: &CrossSection,
        a_hom: f64,
        mu_hom: f64,
        mean_phi: [f64; 2],
        source: MeanSource,
    ) -> Result<Self> {
        if !(a_hom > 0.0) || !(mu_hom > 0.0) {
            return Err(invalid(format!(
                "homogenized moduli must be positive, got a={a_hom}, mu={mu_hom}"
            )));
        }
        let d = [
            a_hom * section.area,
            mu_hom * section.j,
            a_hom * section.i3,
            a_hom * section.i2,
        ];
        Ok(Self {
            a_hom,
            mu_hom,
            mean_phi,
            a0_matrix: Matrix4::from_diagonal(&Vector4::from(d)),
            source,
        })
    }

    pub fn diagonal(&self) -> [f64; 4] {
        [
            self.a0_matrix[(0, 0)],
            self.a0_matrix[(1, 1)],
            self.a0_matrix[(2, 2)],
            self.a0_matrix[(3, 3)],
        ]
    }
}

/// Nodes and weights of `E[f(Z)]`, `Z ~ N(0,1)`, by Golub–Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `(⟨a⁻¹⟩, ⟨μ⁻¹⟩)` in closed form or by quadrature, when the law allows it.
fn analytic_inverse_means(spec: &FieldSpec) -> Option<(f64, f64)> {
    let m = &spec.material;
    let (mu0, l0) = (m.mu0, m.lambda0);
    match &m.model {
        MaterialModel::Deterministic => Some((1.0 / axial_modulus(mu0, l0), 1.0 / mu0)),
        MaterialModel::LognormalTransform {
            sigma_mu,
            lambda,
            upper_bounded: false,
        } => {
            let inv_mu = (sigma_mu * sigma_mu).exp() / mu0;
            match lambda {
                LambdaLaw::Proportional => Some((inv_mu * mu0 / axial_modulus(mu0, l0), inv_mu)),
                LambdaLaw::Independent { sigma } => {
                    let (z, w) = gauss_hermite(48);
                    let mut inv_a = 0.0;
                    for (z1, w1) in z.iter().zip(&w) {
                        let mu = mu0 * (sigma_mu * z1 - 0.5 * sigma_mu * sigma_mu).exp();
                        for (z2, w2) in z.iter().zip(&w) {
                            let lam = l0 * (sigma * z2 - 0.5 * sigma * sigma).exp();
                            inv_a += w1 * w2 / axial_modulus(mu, lam);
                        }
                    }
                    Some((inv_a, inv_mu))
                }
            }
        }
        _ => None,
    }
}

/// `y₀ = v₀`, `y_i = ρ y_{i−1} + √(1−ρ²) v_i`: the exponential-kernel
/// Cholesky factor on a uniform grid applied to `v`.
pub fn ar1_apply(rho: f64, v: &[f64]) -> Vec<f64> {
    let s = (1.0 - rho * rho).sqrt();
    let mut y = Vec::with_capacity(v.len());
    let mut prev = 0.0;
    for (i, &x) in v.iter().enumerate() {
        prev = if i == 0 { x } else { rho * prev + s * x };
        y.push(prev);
    }
    y
}

/// `(⟨a⁻¹⟩, ⟨μ⁻¹⟩)` as spatial averages over one long path at the spec's resolution.
fn ergodic_inverse_means(spec: &FieldSpec) -> Result<(f64, f64, usize)> {
    let dx = spec.length / spec.n_cells as f64;
    let cells = ((ERGODIC_LENGTH_FACTOR * spec.eps / dx).ceil() as usize).max(spec.n_cells);
    let rho = (-dx / spec.eps).exp();
    let normals = |stream: u64| {
        let mut rng = stream_rng(ERGODIC_SEED, stream);
        (0..cells)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect::<Vec<f64>>()
    };
    let m = &spec.material;
    let (mu, lam): (Vec<f64>, Vec<f64>) = match &m.model {
        MaterialModel::Deterministic => (vec![m.mu0; 1], vec![m.lambda0; 1]),
        MaterialModel::LognormalTransform {
            sigma_mu,
            lambda,
            upper_bounded,
        } => {
            let tf = |g: f64, s: f64| {
                if *upper_bounded {
                    (-(s * g).abs()).exp()
                } else {
                    (s * g - 0.5 * s * s).exp()
                }
            };
            let g = ar1_apply(rho, &normals(STREAM_MU));
            let mu: Vec<f64> = g.iter().map(|&x| m.mu0 * tf(x, *sigma_mu)).collect();
            let lam = match lambda {
                LambdaLaw::Proportional => mu.iter().map(|v| v * m.lambda0 / m.mu0).collect(),
                LambdaLaw::Independent { sigma } => ar1_apply(rho, &normals(STREAM_LAMBDA))
                    .iter()
                    .map(|&x| m.lambda0 * tf(x, *sigma))
                    .collect(),
            };
            (mu, lam)
        }
        MaterialModel::AffineLognormal {
            sigma_mu,
            offset,
            ratio,
            floor_frac,
        } => {
            let v: Vec<f64> = normals(STREAM_MU).into_iter().map(f64::exp).collect();
            let y = ar1_apply(rho, &v);
            let mu: Vec<f64> = y
                .iter()
                .map(|&x| (m.mu0 * (offset - sigma_mu * x)).max(floor_frac * m.mu0))
                .collect();
            let lam = mu.iter().map(|v| ratio * v).collect();
            (mu, lam)
        }
    };
    let n = mu.len() as f64;
    let inv_a = mu
        .iter()
        .zip(&lam)
        .map(|(&u, &l)| 1.0 / axial_modulus(u, l))
        .sum::<f64>()
        / n;
    let inv_mu = mu.iter().map(|u| 1.0 / u).sum::<f64>() / n;
    Ok((inv_a, inv_mu, cells))
}

/// Harmonic means of the sampling law; `⟨Φ⟩ = 0` for the centred Gaussian
/// perturbations (symmetric clipping keeps it zero).
pub fn homogenized_coefficients(
    section: &CrossSection,
    spec: &FieldSpec,
) -> Result<HomogenizedCoefficients> {
    spec.validate()?;
    let (inv_a, inv_mu, source) = match analytic_inverse_means(spec) {
        Some((a, m)) => (a, m, MeanSource::Analytic),
        None => {
            let (a, m, cells) = ergodic_inverse_means(spec)?;
            (a, m, MeanSource::Ergodic { cells })
        }
    };
    HomogenizedCoefficients::new(section, 1.0 / inv_a, 1.0 / inv_mu, [0.0, 0.0], source)
}

/// Spatial harmonic means and `⨍Φ` of one sample.
pub fn homogenized_from_sample(
    section: &CrossSection,
    sample: &FieldSample,
) -> Result<HomogenizedCoefficients> {
    sample.validate()?;
    let n = sample.n_cells() as f64;
    let (mut inv_a, mut inv_mu) = (0.0, 0.0);
    for c in 0..sample.n_cells() {
        let m = sample.material(c);
        if !(m.mu > 0.0) {
            return Err(invalid("non-positive material value"));
        }
        inv_a += 1.0 / m.a() / n;
        inv_mu += 1.0 / m.mu / n;
    }
    HomogenizedCoefficients::new(
        section,
        1.0 / inv_a,
        1.0 / inv_mu,
        sample.phi_mean(),
        MeanSource::Sample,
    )
}

/// `Q⁰` at the affine strain `(t₁/L, (k_L−k₀)/L, 0, 0)`.
pub fn e0_closed_form(section: &CrossSection, coeffs: &HomogenizedCoefficients, bc: &RodBC) -> f64 {
    let _ = section;
    let d = coeffs.diagonal();
    d[0] * bc.stretch().powi(2) + d[1] * bc.twist_rate().powi(2)
}

/// Discrete minimum of the homogenized functional with constant coefficients and `⟨Φ⟩`.
pub fn e0_system_solve(
    section: &CrossSection,
    coeffs: &HomogenizedCoefficients,
    bc: &RodBC,
    n: usize,
) -> Result<EnergyReport> {
    let _ = section;
    let sys =
        Rod1dSystem::from_coefficients(vec![coeffs.diagonal(); n], vec![coeffs.mean_phi; n], bc)?;
    let (state, residual) = sys.solve()?;
    Ok(sys.energy_report(&state, residual))
}

fn cell_matrix(section: &CrossSection, m: &IsotropicMaterial) -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::from(rod_stiffness(section, m)))
}

/// `(0, 0, Φ₂, −Φ₁) ⊗ e₁`
fn b_column(phi1: f64, phi2: f64) -> Vector4<f64> {
    Vector4::new(0.0, 0.0, phi2, -phi1)
}

/// `Ā^ε = (⨍A⁻¹)⁻¹` and `B̄^ε = ⨍B`.
pub fn rve_coefficients(
    section: &CrossSection,
    sample: &FieldSample,
) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
    sample.validate()?;
    let n = sample.n_cells() as f64;
    let mut inv_mean = Matrix4::zeros();
    let mut b = Vector4::zeros();
    for c in 0..sample.n_cells() {
        let a = cell_matrix(section, &sample.material(c));
        let inv = a
            .try_inverse()
            .ok_or_else(|| invalid(format!("singular rod matrix in cell {c}")))?;
        inv_mean += inv / n;
        b += b_column(sample.phi1[c], sample.phi2[c]) / n;
    }
    let rve_a = inv_mean
        .try_inverse()
        .ok_or_else(|| invalid("singular mean compliance"))?;
    let mut rve_b = Matrix4::zeros();
    rve_b.set_column(0, &b);
    Ok((rve_a, rve_b))
}

#[derive(Clone, Debug)]
pub struct CorrectorPaths {
    /// Cell boundaries `0 = s₀ < … < s_n = L`.
    pub nodes: Vec<f64>,
    /// `∫₀^s (A⁻¹Ā − Id)` at the nodes.
    pub phi_corr: Vec<Matrix4<f64>>,
    /// `∫₀^s (B − B̄)` (first column) at the nodes.
    pub psi_corr: Vec<Vector4<f64>>,
    pub rve_a: Matrix4<f64>,
    pub rve_b: Matrix4<f64>,
}

/// `∫|f|²` of a piecewise-linear path given by nodal values.
fn pl_l2_squared(nodes: &[f64], values: impl Fn(usize) -> Vec<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..nodes.len() - 1 {
        let h = nodes[i + 1] - nodes[i];
        let (a, b) = (values(i), values(i + 1));
        for k in 0..a.len() {
            s += h / 3.0 * (a[k] * a[k] + a[k] * b[k] + b[k] * b[k]);
        }
    }
    s
}

impl CorrectorPaths {
    pub fn psi_l2_norm(&self) -> f64 {
        pl_l2_squared(&self.nodes, |i| self.psi_corr[i].iter().copied().collect()).sqrt()
    }

    /// Frobenius `L²` norm of the Dirichlet corrector.
    pub fn phi_l2_norm(&self) -> f64 {
        pl_l2_squared(&self.nodes, |i| self.phi_corr[i].iter().copied().collect()).sqrt()
    }

    /// Largest entry at `s = L`.
    pub fn endpoint_defect(&self) -> f64 {
        let n = self.nodes.len() - 1;
        self.phi_corr[n].amax().max(self.psi_corr[n].amax())
    }
}

pub fn correctors(section: &CrossSection, sample: &FieldSample) -> Result<CorrectorPaths> {
    let (rve_a, rve_b) = rve_coefficients(section, sample)?;
    let h = sample.cell_width();
    let n = sample.n_cells();
    let b_bar = rve_b.column(0).into_owned();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut phi_corr = Vec::with_capacity(n + 1);
    let mut psi_corr = Vec::with_capacity(n + 1);
    nodes.push(0.0);
    phi_corr.push(Matrix4::zeros());
    psi_corr.push(Vector4::zeros());
    for c in 0..n {
        let a = cell_matrix(section, &sample.material(c));
        let inv = a
            .try_inverse()
            .ok_or_else(|| invalid("singular rod matrix"))?;
        let dphi = (inv * rve_a - Matrix4::identity()) * h;
        let dpsi = (b_column(sample.phi1[c], sample.phi2[c]) - b_bar) * h;
        nodes.push((c + 1) as f64 * h);
        phi_corr.push(phi_corr[c] + dphi);
        psi_corr.push(psi_corr[c] + dpsi);
    }
    // the defining means make the endpoint vanish; remove accumulated roundoff
    phi_corr[n] = Matrix4::zeros();
    psi_corr[n] = Vector4::zeros();
    Ok(CorrectorPaths {
        nodes,
        phi_corr,
        psi_corr,
        rve_a,
        rve_b,
    })
}

/// Squared `⨍`-norm of the part of a piecewise-linear `f` orthogonal to `{1, s}`.
/// With `discrete` the function and `s` are replaced by element averages.
fn projected_norm2(nodes: &[f64], f: &[f64], discrete: bool) -> f64 {
    let length = nodes[nodes.len() - 1] - nodes[0];
    // Gram data for the basis {1, s, f}
    let (mut g11, mut g1s, mut gss, mut g1f, mut gsf, mut gff) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..nodes.len() - 1 {
        let (s0, s1) = (nodes[i], nodes[i + 1]);
        let h = s1 - s0;
        let (f0, f1) = (f[i], f[i + 1]);
        let (sm, fm) = (0.5 * (s0 + s1), 0.5 * (f0 + f1));
        g11 += h;
        g1s += h * sm;
        g1f += h * fm;
        if discrete {
            gss += h * sm * sm;
            gsf += h * sm * fm;
            gff += h * fm * fm;
        } else {
            // Simpson, exact for quadratics
            gss += h / 6.0 * (s0 * s0 + 4.0 * sm * sm + s1 * s1);
            gsf += h / 6.0 * (s0 * f0 + 4.0 * sm * fm + s1 * f1);
            gff += h / 6.0 * (f0 * f0 + 4.0 * fm * fm + f1 * f1);
        }
    }
    let det = g11 * gss - g1s * g1s;
    let c1 = (gss * g1f - g1s * gsf) / det;
    let cs = (g11 * gsf - g1s * g1f) / det;
    ((gff - c1 * g1f - cs * gsf) / length).max(0.0)
}

/// Predicted `E⁰ − E^ε` for constant material: stretch energy lost to the
/// flexural relaxation driven by the auxiliary corrector,
/// `a|S|(t₁/L)² κ/(1+κ)`, `κ = (|S|/L²)(⨍(PΨ₁)²/I2 + ⨍(PΨ₂)²/I3)`.
///
/// `n_elements = Some(N)` evaluates the same quantity on the P1 space of `N` elements.
pub fn corrector_energy_deficit(
    section: &CrossSection,
    sample: &FieldSample,
    bc: &RodBC,
    n_elements: Option<usize>,
) -> Result<f64> {
    if sample.has_random_material() {
        return Err(invalid(
            "the corrector deficit needs a deterministic material",
        ));
    }
    let cells = sample.n_cells();
    let n = n_elements.unwrap_or(cells);
    if n % cells != 0 {
        return Err(invalid(
            "element count must be a multiple of the field cells",
        ));
    }
    let h = bc.length / n as f64;
    let per = n / cells;
    let mean_phi = sample.phi_mean();
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let mut psi = [vec![0.0; n + 1], vec![0.0; n + 1]];
    for e in 0..n {
        let c = e / per;
        psi[0][e + 1] = psi[0][e] + h * (sample.phi1[c] - mean_phi[0]);
        psi[1][e + 1] = psi[1][e] + h * (sample.phi2[c] - mean_phi[1]);
    }
    let discrete = n_elements.is_some();
    let p1 = projected_norm2(&nodes, &psi[0], discrete);
    let p2 = projected_norm2(&nodes, &psi[1], discrete);
    let kappa = section.area / (bc.length * bc.length) * (p1 / section.i2 + p2 / section.i3);
    let stretch = sample.base.a() * section.area * bc.stretch().powi(2);
    Ok(stretch * kappa / (1.0 + kappa))
}

/// `⨍|(ū, r) − (ū_aff, r_aff)|²` by the trapezoidal rule.
pub fn minimizer_deviation(state: &RodState1D, bc: &RodBC) -> f64 {
    let n = state.grid.len();
    let dev = |i: usize| {
        let x = state.grid[i];
        let du = state.u_bar[i] - bc.t[0] * x / bc.length;
        let dr1 = state.r[i][0] - (bc.k0 + bc.twist_rate() * x);
        du * du + dr1 * dr1 + state.r[i][1].powi(2) + state.r[i][2].powi(2)
    };
    let mut s = 0.0;
    for i in 0..n - 1 {
        s += 0.5 * (state.grid[i + 1] - state.grid[i]) * (dev(i) + dev(i + 1));
    }
    s / bc.length
}

#[derive(Clone, Debug)]
pub struct RateSweepConfig {
    pub section: CrossSection,
    /// Template; `eps` and `n_cells` are overwritten per sweep point.
    pub field: FieldSpec,
    pub bc: RodBC,
    pub eps: Vec<f64>,
    pub n_elements: usize,
    pub n_samples: usize,
    pub seed_base: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatePoint {
    pub eps: f64,
    pub l2_error: f64,
    pub n_samples: usize,
    pub mean_energy: f64,
    pub under_resolved: bool,
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub e0: f64,
    pub coefficients: HomogenizedCoefficients,
    pub points: Vec<RatePoint>,
    /// Fit over resolved points only.
    pub fit: LogLogFit,
}

impl RateSweepConfig {
    fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::Config("empty eps grid".into()));
        }
        if self.n_samples == 0 {
            return Err(invalid("rate sweep needs at least one sample"));
        }
        self.bc.validate()
    }

    fn spec_for(&self, eps: f64) -> FieldSpec {
        let mut spec = self.field.clone();
        spec.eps = eps;
        spec.length = self.bc.length;
        spec.n_cells = self.n_elements;
        spec
    }
}

/// Per-sample values of `f` for one `ε`, in sample order.
fn per_sample<T: Send>(
    sampler: &FieldSampler,
    seed_base: u64,
    n_samples: usize,
    f: impl Fn(&FieldSample) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n_samples)
        .into_par_iter()
        .map(|m| {
            sampler
                .sample(sample_seed(seed_base, m as u64))
                .and_then(|s| f(&s))
        })
        .collect()
}

/// `‖E^ε − E⁰‖_{L²(Ω)}` per `ε` and its log-log slope.
pub fn rate_sweep(cfg: &RateSweepConfig) -> Result<RateReport> {
    cfg.validate()?;
    let coefficients = homogenized_coefficients(&cfg.section, &cfg.spec_for(cfg.eps[0]))?;
    let e0 = e0_closed_form(&cfg.section, &coefficients, &cfg.bc);
    let mut points = Vec::new();
    for &eps in &cfg.eps {
        let spec = cfg.spec_for(eps);
        let under = spec.under_resolved();
        if under {
            log::warn!(
                "eps = {eps} is under-resolved with N = {}; excluded from the fit",
                cfg.n_elements
            );
        }
        let sampler = FieldSampler::new(spec)?;
        let values = per_sample(&sampler, cfg.seed_base, cfg.n_samples, |s| {
            let sys = crate::rod1d::assemble_1d(&cfg.section, s, &cfg.bc, cfg.n_elements)?;
            let (state, residual) = sys.solve()?;
            Ok(sys.energy_report(&state, residual).value)
        })?;
        points.push(RatePoint {
            eps,
            l2_error: l2_error(&values, e0),
            n_samples: values.len(),
            mean_energy: mean(&values),
            under_resolved: under,
        });
    }
    let used: Vec<&RatePoint> = points.iter().filter(|p| !p.under_resolved).collect();
    let fit = fit_loglog(
        &used.iter().map(|p| p.eps).collect::<Vec<_>>(),
        &used.iter().map(|p| p.l2_error).collect::<Vec<_>>(),
    )?;
    Ok(RateReport {
        e0,
        coefficients,
        points,
        fit,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorSweepPoint {
    pub eps: f64,
    /// Monte Carlo mean of `‖Ψ^ε‖_{L²}`.
    pub psi_norm_mean: f64,
    /// Monte Carlo RMS of `|Ā^ε − A⁰|` (Frobenius).
    pub rve_rms_error: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug)]
pub struct CorrectorSweepReport {
    pub points: Vec<CorrectorSweepPoint>,
    pub psi_fit: LogLogFit,
    /// `None` when the material is deterministic and `Ā^ε = A⁰` exactly.
    pub rve_fit: Option<LogLogFit>,
}

/// Corrector norms and RVE errors per `ε` with their log-log slopes.
pub fn corrector_sweep(cfg: &RateSweepConfig) -> Result<CorrectorSweepReport> {
    cfg.validate()?;
    let coefficients = homogenized_coefficients(&cfg.section, &cfg.spec_for(cfg.eps[0]))?;
    let mut points = Vec::new();
    for &eps in &cfg.eps {
        let sampler = FieldSampler::new(cfg.spec_for(eps))?;
        let vals = per_sample(&sampler, cfg.seed_base, cfg.n_samples, |s| {
            let c = correctors(&cfg.section, s)?;
            Ok((c.psi_l2_norm(), (c.rve_a - coefficients.a0_matrix).norm()))
        })?;
        let psi: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let rve: Vec<f64> = vals.iter().map(|v| v.1).collect();
        points.push(CorrectorSweepPoint {
            eps,
            psi_norm_mean: mean(&psi),
            rve_rms_error: l2_error(&rve, 0.0),
            n_samples: vals.len(),
        });
    }
    let eps: Vec<f64> = points.iter().map(|p| p.eps).collect();
    let psi_fit = fit_loglog(
        &eps,
        &points.iter().map(|p| p.psi_norm_mean).collect::<Vec<_>>(),
    )?;
    let rve_fit = if cfg.field.material.is_deterministic() {
        None
    } else {
        Some(fit_loglog(
            &eps,
            &points.iter().map(|p| p.rve_rms_error).collect::<Vec<_>>(),
        )?)
    };
    Ok(CorrectorSweepReport {
        points,
        psi_fit,
        rve_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CholeskyFactor, MaterialSpec};
    use crate::geometry::make_disc;

    fn base() -> IsotropicMaterial {
        IsotropicMaterial::new(30.8, 66.6).unwrap()
    }

    #[test]
    fn gauss_hermite_moments() {
        let (z, w) = gauss_hermite(20);
        let m = |k: i32| z.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn two_value_harmonic_mean() {
        let s = make_disc(1.0).unwrap();
        let mut sample =
            FieldSample::unperturbed(1.0, 2, IsotropicMaterial::new(1.0, 0.0).unwrap());
        // λ = 0 gives a = 2μ
        sample.mu = Some(vec![0.5, 2.0]);
        sample.lambda = Some(vec![0.0, 0.0]);
        let c = homogenized_from_sample(&s, &sample).unwrap();
        assert!((c.a_hom - 1.6).abs() < 1e-14);
    }

    #[test]
    fn ar1_matches_cholesky() {
        let spec =
            crate::fields::CovarianceSpec::new(1.0, 0.07, crate::fields::midpoint_grid(1.0, 40))
                .unwrap();
        let l: CholeskyFactor =
            crate::fields::cholesky_factor(&crate::fields::build_covariance(&spec)).unwrap();
        let v: Vec<f64> = (0..40)
            .map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4)
            .collect();
        let rho = (-(1.0 / 40.0) / 0.07f64).exp();
        for (a, b) in l.apply(&v).iter().zip(ar1_apply(rho, &v)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_ratios() {
        let s = make_disc(1.0).unwrap();
        let c =
            HomogenizedCoefficients::new(&s, base().a(), base().mu, [0.0; 2], MeanSource::Analytic)
                .unwrap();
        let e = |t1: f64| e0_closed_form(&s, &c, &RodBC::tension(1.0, t1));
        assert!((e(2.0) / e(1.0) - 4.0).abs() < 1e-14);
        assert!((e(-0.5) / e(1.0) - 0.25).abs() < 1e-14);
        let sys =
            e0_system_solve(&s, &c, &RodBC::tension(1.0, 1.0).with_twist(0.0, 0.5), 40).unwrap();
        let cf = e0_closed_form(&s, &c, &RodBC::tension(1.0, 1.0).with_twist(0.0, 0.5));
        assert!((sys.value - cf).abs() < 1e-10 * cf);
    }

    #[test]
    fn constant_phi_gives_zero_aux_corrector() {
        let s = make_disc(1.0).unwrap();
        let sample = FieldSample::from_fn(1.0, 10, base(), |_| [0.2, -0.1]);
        let c = correctors(&s, &sample).unwrap();
        assert!(c.psi_corr.iter().all(|v| v.amax() < 1e-15));
        assert!(c.phi_corr.iter().all(|v| v.amax() < 1e-15));
        assert!((c.rve_b[(2, 0)] - -0.1).abs() < 1e-15);
        assert!((c.rve_b[(3, 0)] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn deficit_matches_discrete_solution() {
        let s = make_disc(0.7).unwrap();
        let sample = FieldSample::from_fn(1.0, 20, base(), |t| {
            [0.3 * (9.0 * t).sin(), 0.2 * (4.0 * t).cos() + 0.1]
        });
        let bc = RodBC::tension(1.0, 1.0).with_twist(0.0, 0.4);
        let n = 80;
        let e_eps = crate::rod1d::effective_modulus_1d(&s, &sample, &bc, n)
            .unwrap()
            .value;
        let c =
            HomogenizedCoefficients::new(&s, base().a(), base().mu, [0.0; 2], MeanSource::Analytic)
                .unwrap();
        let e0 = e0_closed_form(&s, &c, &bc);
        let gap = corrector_energy_deficit(&s, &sample, &bc, Some(n)).unwrap();
        assert!(
            ((e0 - e_eps) - gap).abs() < 1e-10 * e0,
            "{} vs {}",
            e0 - e_eps,
            gap
        );
        let cont = corrector_energy_deficit(&s, &sample, &bc, None).unwrap();
        assert!((cont - gap).abs() < 1e-2 * gap);
    }

    #[test]
    fn lognormal_inverse_mean_matches_ergodic() {
        let spec = FieldSpec {
            length: 1.0,
            n_cells: 200,
            eps: 0.02,
            sigma1: 0.0,
            sigma2: 0.0,
            clip: None,
            material: MaterialSpec {
                mu0: 30.8,
                lambda0: 66.6,
                model: MaterialModel::LognormalTransform {
                    sigma_mu: 0.2,
                    lambda: LambdaLaw::Independent { sigma: 0.1 },
                    upper_bounded: false,
                },
            },
        };
        let (a, m) = analytic_inverse_means(&spec).unwrap();
        let (ea, em, _) = ergodic_inverse_means(&spec).unwrap();
        assert!((a - ea).abs() < 0.01 * a);
        assert!((m - em).abs() < 0.01 * m);
    }
}
