//! Correlated random paths along the rod axis: exponential covariance,
//! Cholesky factorization and deterministic seeded sampling.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::IsotropicMaterial;

/// RNG stream ids per random component.
pub const STREAM_PHI1: u64 = 1;
pub const STREAM_PHI2: u64 = 2;
pub const STREAM_MU: u64 = 3;
pub const STREAM_LAMBDA: u64 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSpec {
    pub sigma: f64,
    pub eps: f64,
    pub grid: Vec<f64>,
}

impl CovarianceSpec {
    pub fn new(sigma: f64, eps: f64, grid: Vec<f64>) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        if !(eps > 0.0) {
            return Err(invalid(format!(
                "correlation length must be positive, got {eps}"
            )));
        }
        if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid must be non-empty and strictly increasing"));
        }
        Ok(Self { sigma, eps, grid })
    }
}

/// Midpoints of `n` uniform cells on `(0, length)`.
pub fn midpoint_grid(length: f64, n: usize) -> Vec<f64> {
    let h = length / n as f64;
    (0..n).map(|i| (i as f64 + 0.5) * h).collect()
}

/// `C_ij = σ² exp(−|t_i − t_j|/ε)`.
pub fn build_covariance(spec: &CovarianceSpec) -> DMatrix<f64> {
    let n = spec.grid.len();
    let s2 = spec.sigma * spec.sigma;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            s2
        } else {
            s2 * (-(spec.grid[i] - spec.grid[j]).abs() / spec.eps).exp()
        }
    })
}

/// Lower Cholesky factor stored packed by rows.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    n: usize,
    data: Vec<f64>,
    /// Pivots within `tol` of zero replaced by zero.
    pub clamped_pivots: usize,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[i * (i + 1) / 2 + j]
        }
    }

    /// `L v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                row.iter().zip(v).map(|(l, x)| l * x).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Same factor with every entry multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
            clamped_pivots: self.clamped_pivots,
        }
    }
}

/// Cholesky factorization of a symmetric positive semi-definite matrix.
///
/// Pivots with `|d| ≤ tol`, `tol = 1e−10 · max diag`, are clamped to zero;
/// anything more negative is an error.
pub fn cholesky_factor(c: &DMatrix<f64>) -> Result<CholeskyFactor> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(invalid("covariance matrix must be square"));
    }
    let scale = (0..n).map(|i| c[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    let mut data = vec![0.0; n * (n + 1) / 2];
    let mut clamped = 0;
    let off = |i: usize| i * (i + 1) / 2;
    for j in 0..n {
        let rj = off(j);
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= data[rj + k] * data[rj + k];
        }
        if d < -tol || !d.is_finite() {
            return Err(Error::NotPositiveSemidefinite { row: j, pivot: d });
        }
        let ljj = if d <= tol {
            clamped += 1;
            log::debug!("clamped Cholesky pivot {d:e} at row {j}");
            0.0
        } else {
            d.sqrt()
        };
        data[rj + j] = ljj;
        for i in j + 1..n {
            let ri = off(i);
            if ljj == 0.0 {
                data[ri + j] = 0.0;
                continue;
            }
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= data[ri + k] * data[rj + k];
            }
            data[ri + j] = s / ljj;
        }
    }
    Ok(CholeskyFactor {
        n,
        data,
        clamped_pivots: clamped,
    })
}

/// Generator keyed by `(seed, stream_id)`.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// `L V` with `V` standard normal from stream `(seed, stream_id)`.
pub fn sample_gaussian_path(l: &CholeskyFactor, seed: u64, stream_id: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream_id);
    let v: Vec<f64> = (0..l.dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    l.apply(&v)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed derived from the ensemble seed and the sample index.
pub fn sample_seed(seed_base: u64, index: u64) -> u64 {
    splitmix64(seed_base ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaLaw {
    /// `λ = (λ₀/μ₀) μ` pointwise.
    Proportional,
    /// Independent log-normal field with its own standard deviation.
    Independent { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialModel {
    Deterministic,
    /// `μ = μ₀ exp(G − σ²/2)`, or `μ₀ exp(−|G|)` when `upper_bounded`.
    LognormalTransform {
        sigma_mu: f64,
        lambda: LambdaLaw,
        upper_bounded: bool,
    },
    /// `μ = μ₀ (offset − L_μ V)` with `V` i.i.d. LN(0,1), `λ = ratio · μ`,
    /// clamped below at `floor_frac · μ₀`.
    AffineLognormal {
        sigma_mu: f64,
        offset: f64,
        ratio: f64,
        floor_frac: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub mu0: f64,
    pub lambda0: f64,
    pub model: MaterialModel,
}

impl MaterialSpec {
    pub fn deterministic(mu0: f64, lambda0: f64) -> Self {
        Self {
            mu0,
            lambda0,
            model: MaterialModel::Deterministic,
        }
    }

    pub fn base(&self) -> Result<IsotropicMaterial> {
        IsotropicMaterial::new(self.mu0, self.lambda0)
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.model, MaterialModel::Deterministic)
    }

    pub fn validate(&self) -> Result<()> {
        self.base()?;
        let nonneg = |s: f64, name: &str| {
            if s >= 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be non-negative, got {s}")))
            }
        };
        match &self.model {
            MaterialModel::Deterministic => Ok(()),
            MaterialModel::LognormalTransform {
                sigma_mu, lambda, ..
            } => {
                nonneg(*sigma_mu, "sigma_mu")?;
                if let LambdaLaw::Independent { sigma } = lambda {
                    nonneg(*sigma, "sigma_lambda")?;
                }
                Ok(())
            }
            MaterialModel::AffineLognormal {
                sigma_mu,
                offset,
                ratio,
                floor_frac,
            } => {
                nonneg(*sigma_mu, "sigma_mu")?;
                nonneg(*ratio, "ratio")?;
                if !(*offset > 0.0) || !(*floor_frac > 0.0) {
                    return Err(invalid("offset and floor_frac must be positive"));
                }
                Ok(())
            }
        }
    }
}

/// Material paths `(μ, λ)` for one sample, from an existing correlation factor.
pub fn sample_material_paths(
    corr: &CholeskyFactor,
    spec: &MaterialSpec,
    seed: u64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    spec.validate()?;
    let (mu0, lambda0) = (spec.mu0, spec.lambda0);
    let paths = match &spec.model {
        MaterialModel::Deterministic => return Ok(None),
        MaterialModel::LognormalTransform {
            sigma_mu,
            lambda,
            upper_bounded,
        } => {
            let g = sample_gaussian_path(corr, seed, STREAM_MU);
            let transform = |g: f64, s: f64| {
                if *upper_bounded {
                    (-(s * g).abs()).exp()
                } else {
                    (s * g - 0.5 * s * s).exp()
                }
            };
            let mu: Vec<f64> = g.iter().map(|&x| mu0 * transform(x, *sigma_mu)).collect();
            let lam: Vec<f64> = match lambda {
                LambdaLaw::Proportional => mu.iter().map(|m| m * lambda0 / mu0).collect(),
                LambdaLaw::Independent { sigma } => sample_gaussian_path(corr, seed, STREAM_LAMBDA)
                    .iter()
                    .map(|&x| lambda0 * transform(x, *sigma))
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
            let mut rng = stream_rng(seed, STREAM_MU);
            let v: Vec<f64> = (0..corr.dim())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.exp()
                })
                .collect();
            let lv = corr.apply(&v);
            let floor = floor_frac * mu0;
            let mu: Vec<f64> = lv
                .iter()
                .map(|&x| (mu0 * (offset - sigma_mu * x)).max(floor))
                .collect();
            let lam = mu.iter().map(|m| ratio * m).collect();
            (mu, lam)
        }
    };
    if paths.0.iter().any(|v| !(*v > 0.0) || !v.is_finite())
        || paths.1.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
    {
        return Err(Error::Sampling("material path is not positive".into()));
    }
    Ok(Some(paths))
}

/// Statistical description of the perturbation and material fields on a rod.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub length: f64,
    /// Number of piecewise-constant cells.
    pub n_cells: usize,
    pub eps: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Smallness bound `c_S`; `None` disables clipping.
    pub clip: Option<f64>,
    pub material: MaterialSpec,
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || self.n_cells == 0 {
            return Err(invalid("field spec needs positive length and cell count"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid(format!(
                "correlation length must be positive, got {}",
                self.eps
            )));
        }
        for s in [self.sigma1, self.sigma2] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(invalid(format!("sigma must be non-negative, got {s}")));
            }
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(invalid(format!("clip bound must be positive, got {c}")));
            }
        }
        self.material.validate()
    }

    /// `ε < 4L/N`: fields vary on the scale of a few cells.
    pub fn under_resolved(&self) -> bool {
        self.eps < 4.0 * self.length / self.n_cells as f64
    }
}

/// One realization of `(Φ₁, Φ₂, μ, λ)`, constant on each of `n_cells` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub length: f64,
    /// Cell midpoints.
    pub grid: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub mu: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub base: IsotropicMaterial,
    pub seed: u64,
    pub eps: f64,
    /// Fraction of `Φ` entries changed by smallness clipping.
    pub clip_fraction: f64,
    pub under_resolved: bool,
}

impl FieldSample {
    /// Deterministic material, `Φ` given by closures at the cell midpoints.
    pub fn from_fn(
        length: f64,
        n_cells: usize,
        base: IsotropicMaterial,
        phi: impl Fn(f64) -> [f64; 2],
    ) -> Self {
        let grid = midpoint_grid(length, n_cells);
        let (phi1, phi2) = grid.iter().map(|&t| phi(t)).map(|p| (p[0], p[1])).unzip();
        Self {
            length,
            grid,
            phi1,
            phi2,
            mu: None,
            lambda: None,
            base,
            seed: 0,
            eps: f64::INFINITY,
            clip_fraction: 0.0,
            under_resolved: false,
        }
    }

    /// `Φ ≡ 0`, deterministic material.
    pub fn unperturbed(length: f64, n_cells: usize, base: IsotropicMaterial) -> Self {
        Self::from_fn(length, n_cells, base, |_| [0.0, 0.0])
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    pub fn cell_width(&self) -> f64 {
        self.length / self.n_cells() as f64
    }

    pub fn has_random_material(&self) -> bool {
        self.mu.is_some()
    }

    pub fn material(&self, cell: usize) -> IsotropicMaterial {
        match (&self.mu, &self.lambda) {
            (Some(m), Some(l)) => IsotropicMaterial {
                mu: m[cell],
                lambda: l[cell],
            },
            _ => self.base,
        }
    }

    /// Spatial mean `⨍Φ` of the sample.
    pub fn phi_mean(&self) -> [f64; 2] {
        let n = self.n_cells() as f64;
        [
            self.phi1.iter().sum::<f64>() / n,
            self.phi2.iter().sum::<f64>() / n,
        ]
    }

    /// Cell containing `x₁ ∈ [0, L]`.
    pub fn cell_of(&self, x1: f64) -> usize {
        let c = (x1 / self.cell_width()).floor();
        (c.max(0.0) as usize).min(self.n_cells() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if n == 0 || self.phi1.len() != n || self.phi2.len() != n {
            return Err(invalid("field sample path lengths do not match the grid"));
        }
        if let (Some(m), Some(l)) = (&self.mu, &self.lambda) {
            if m.len() != n || l.len() != n {
                return Err(invalid("material path lengths do not match the grid"));
            }
            if m.iter().any(|v| !(*v > 0.0)) || l.iter().any(|v| !(*v >= 0.0)) {
                return Err(invalid("material paths must be positive"));
            }
        }
        if self.phi1.iter().chain(&self.phi2).any(|v| !v.is_finite()) {
            return Err(invalid("perturbation paths contain non-finite values"));
        }
        Ok(())
    }

    /// Writes `t, phi1, phi2, mu, lambda`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,phi1,phi2,mu,lambda")?;
        for i in 0..self.n_cells() {
            let m = self.material(i);
            writeln!(
                f,
                "{},{},{},{},{}",
                self.grid[i], self.phi1[i], self.phi2[i], m.mu, m.lambda
            )?;
        }
        Ok(())
    }
}

/// Clips `Φ` entrywise to `[−c_S, c_S]` and records the clipped fraction.
pub fn enforce_smallness(mut sample: FieldSample, c_s: f64) -> Result<FieldSample> {
    if !(c_s > 0.0) {
        return Err(invalid(format!(
            "smallness bound must be positive, got {c_s}"
        )));
    }
    let mut clipped = 0usize;
    for v in sample.phi1.iter_mut().chain(sample.phi2.iter_mut()) {
        if v.abs() > c_s {
            *v = v.clamp(-c_s, c_s);
            clipped += 1;
        }
    }
    sample.clip_fraction = clipped as f64 / (2 * sample.n_cells()) as f64;
    Ok(sample)
}

/// Factorizes the correlation matrix once; draws samples by seed.
#[derive(Clone, Debug)]
pub struct FieldSampler {
    pub spec: FieldSpec,
    grid: Vec<f64>,
    corr: CholeskyFactor,
}

impl FieldSampler {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        spec.validate()?;
        if spec.under_resolved() {
            log::warn!(
                "correlation length {} is under-resolved by {} cells on length {}",
                spec.eps,
                spec.n_cells,
                spec.length
            );
        }
        let grid = midpoint_grid(spec.length, spec.n_cells);
        let cov = CovarianceSpec::new(1.0, spec.eps, grid.clone())?;
        let corr = cholesky_factor(&build_covariance(&cov))?;
        Ok(Self { spec, grid, corr })
    }

    pub fn correlation_factor(&self) -> &CholeskyFactor {
        &self.corr
    }

    pub fn sample(&self, seed: u64) -> Result<FieldSample> {
        let spec = &self.spec;
        let gaussian = |sigma: f64, stream: u64| {
            if sigma == 0.0 {
                vec![0.0; self.grid.len()]
            } else {
                sample_gaussian_path(&self.corr, seed, stream)
                    .into_iter()
                    .map(|v| sigma * v)
                    .collect()
            }
        };
        let phi1 = gaussian(spec.sigma1, STREAM_PHI1);
        let phi2 = gaussian(spec.sigma2, STREAM_PHI2);
        let material = sample_material_paths(&self.corr, &spec.material, seed)?;
        let (mu, lambda) = match material {
            Some((m, l)) => (Some(m), Some(l)),
            None => (None, None),
        };
        let sample = FieldSample {
            length: spec.length,
            grid: self.grid.clone(),
            phi1,
            phi2,
            mu,
            lambda,
            base: spec.material.base()?,
            seed,
            eps: spec.eps,
            clip_fraction: 0.0,
            under_resolved: spec.under_resolved(),
        };
        match spec.clip {
            Some(c) => enforce_smallness(sample, c),
            None => Ok(sample),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sigma: f64, eps: f64, n: usize) -> CovarianceSpec {
        CovarianceSpec::new(sigma, eps, midpoint_grid(1.0, n)).unwrap()
    }

    #[test]
    fn covariance_diagonal_and_zero_sigma() {
        let c = build_covariance(&spec(0.7, 0.1, 20));
        for i in 0..20 {
            assert_eq!(c[(i, i)], 0.7 * 0.7);
        }
        assert!(build_covariance(&spec(0.0, 0.1, 5))
            .iter()
            .all(|&v| v == 0.0));
        let wide = build_covariance(&spec(1.0, 1e9, 5));
        assert!(wide.iter().all(|&v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn two_by_two_factor() {
        let rho = 0.6;
        let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let l = cholesky_factor(&c).unwrap();
        assert_eq!(l.get(0, 0), 1.0);
        assert!((l.get(1, 0) - rho).abs() < 1e-15);
        assert!((l.get(1, 1) - (1.0f64 - rho * rho).sqrt()).abs() < 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn reconstructs_and_clamps() {
        let c = build_covariance(&spec(1.3, 0.05, 60));
        let l = cholesky_factor(&c).unwrap().to_dense();
        let err = (&l * l.transpose() - &c).norm() / c.norm();
        assert!(err < 1e-10);
        // rank-one: all pivots after the first clamp to zero
        let ones = DMatrix::from_element(4, 4, 2.0);
        let f = cholesky_factor(&ones).unwrap();
        assert_eq!(f.clamped_pivots, 3);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_factor(&bad),
            Err(Error::NotPositiveSemidefinite { row: 1, .. })
        ));
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let l = cholesky_factor(&build_covariance(&spec(1.0, 0.1, 30))).unwrap();
        let a = sample_gaussian_path(&l, 42, STREAM_PHI1);
        assert_eq!(a, sample_gaussian_path(&l, 42, STREAM_PHI1));
        assert_ne!(a, sample_gaussian_path(&l, 42, STREAM_PHI2));
        assert_ne!(a, sample_gaussian_path(&l, 43, STREAM_PHI1));
        assert_ne!(sample_seed(1, 0), sample_seed(1, 1));
    }

    #[test]
    fn clipping() {
        let base = IsotropicMaterial::new(1.0, 1.0).unwrap();
        let s = FieldSample::from_fn(1.0, 10, base, |_| [1.0, -0.2]);
        let c = enforce_smallness(s, 0.5).unwrap();
        assert!(c.phi1.iter().all(|&v| v == 0.5));
        assert!(c.phi2.iter().all(|&v| v == -0.2));
        assert_eq!(c.clip_fraction, 0.5);
    }

    #[test]
    fn lognormal_material_means() {
        let fs = FieldSpec {
            length: 1.0,
            n_cells: 50,
            eps: 0.05,
            sigma1: 0.0,
            sigma2: 0.0,
            clip: None,
            material: MaterialSpec {
                mu0: 2.0,
                lambda0: 4.0,
                model: MaterialModel::LognormalTransform {
                    sigma_mu: 0.3,
                    lambda: LambdaLaw::Proportional,
                    upper_bounded: false,
                },
            },
        };
        let sampler = FieldSampler::new(fs).unwrap();
        let m = 2000;
        let mut mean = 0.0;
        for k in 0..m {
            let s = sampler.sample(sample_seed(7, k)).unwrap();
            let mu = s.mu.as_ref().unwrap();
            let lam = s.lambda.as_ref().unwrap();
            assert!(mu.iter().zip(lam).all(|(a, b)| (b / a - 2.0).abs() < 1e-12));
            mean += mu[25] / m as f64;
        }
        assert!((mean - 2.0).abs() < 0.05, "mean {mean}");
    }
}
