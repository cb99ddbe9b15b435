//! Monte Carlo ensembles, fluctuation statistics, systematic errors, the
//! `h`-trend fit and the multi-fidelity shift estimator.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::fields::{sample_seed, FieldSample, FieldSampler, FieldSpec};
use crate::geometry::CrossSection;
use crate::rod1d::{effective_modulus_1d, EnergyReport, RodBC};
use crate::rod3d::{effective_modulus_3d, meshed_section, Solve3dConfig};
use crate::stats::{ecdf, fit_loglog, l2_error, mean, variance, LogLogFit};

/// Largest tolerated fraction of failed samples.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "3d")]
    ThreeD,
    #[serde(rename = "coupled")]
    /// 1D and 3D on the identical sample.
    Coupled,
}

/// Everything a single sample evaluation needs.
#[derive(Clone, Debug)]
pub struct EnsembleSetup {
    pub experiment: String,
    pub section: CrossSection,
    pub field: FieldSpec,
    pub bc: RodBC,
    pub n_elements_1d: usize,
    pub h: f64,
    pub solve3d: Solve3dConfig,
}

impl EnsembleSetup {
    /// Section used by both fidelities: the 3D mesh whenever 3D is involved.
    pub fn effective_section(&self, model: ModelKind) -> Result<CrossSection> {
        match model {
            ModelKind::OneD => Ok(self.section.clone()),
            _ => meshed_section(&self.section, self.solve3d.rings),
        }
    }
}

/// One row of the energies table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub experiment: String,
    pub sample_id: usize,
    pub seed: u64,
    pub fidelity: String,
    pub h: f64,
    pub eps: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E_stretch")]
    pub e_stretch: Option<f64>,
    #[serde(rename = "E_twist")]
    pub e_twist: Option<f64>,
    #[serde(rename = "E_bend2")]
    pub e_bend2: Option<f64>,
    #[serde(rename = "E_bend3")]
    pub e_bend3: Option<f64>,
    pub iters: usize,
    pub residual: f64,
}

impl EnergyRow {
    fn new(
        setup: &EnsembleSetup,
        sample_id: usize,
        seed: u64,
        fidelity: &str,
        h: f64,
        r: &EnergyReport,
    ) -> Self {
        let t = r.terms.as_ref();
        Self {
            experiment: setup.experiment.clone(),
            sample_id,
            seed,
            fidelity: fidelity.to_string(),
            h,
            eps: setup.field.eps,
            e: r.value,
            e_stretch: t.map(|t| t.stretch),
            e_twist: t.map(|t| t.twist),
            e_bend2: t.map(|t| t.bend2),
            e_bend3: t.map(|t| t.bend3),
            iters: r.iterations,
            residual: r.residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleFailure {
    pub sample_id: usize,
    pub seed: u64,
    pub fidelity: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct EnsembleTable {
    pub rows: Vec<EnergyRow>,
    pub failures: Vec<SampleFailure>,
    /// `(sample_id, fidelity, sha256 of Φ)` per evaluated row.
    pub fingerprints: Vec<(usize, String, String)>,
}

impl EnsembleTable {
    pub fn values(&self, fidelity: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.fidelity == fidelity)
            .map(|r| r.e)
            .collect()
    }

    /// `(E^{ε,h}, E^ε)` for samples where both fidelities succeeded.
    pub fn coupled_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs = Vec::new();
        for r3 in self.rows.iter().filter(|r| r.fidelity == "3d") {
            if let Some(r1) = self
                .rows
                .iter()
                .find(|r| r.fidelity == "1d" && r.sample_id == r3.sample_id)
            {
                pairs.push((r3.e, r1.e));
            }
        }
        pairs
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_energies_csv(path, &self.rows)
    }
}

pub fn write_energies_csv(path: &Path, rows: &[EnergyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "experiment",
            "sample_id",
            "seed",
            "fidelity",
            "h",
            "eps",
            "E",
            "E_stretch",
            "E_twist",
            "E_bend2",
            "E_bend3",
            "iters",
            "residual",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energies_csv(path: &Path) -> Result<Vec<EnergyRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<EnergyRow>, _>>()?;
    Ok(rows)
}

/// Hex SHA-256 of the little-endian bytes of `Φ₁` then `Φ₂`.
pub fn phi_fingerprint(sample: &FieldSample) -> String {
    let mut hasher = Sha256::new();
    for v in sample.phi1.iter().chain(&sample.phi2) {
        hasher.update(v.to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

enum Outcome {
    Row(EnergyRow, String),
    Failed(SampleFailure),
}

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::Ensemble { failed, total });
    }
    Ok(())
}

/// Evaluates `m` samples (seeds `sample_seed(seed_base, i)`) at each of the
/// thicknesses `hs` (3D) and/or once in 1D. Rows are ordered by sample, then
/// 1D before 3D, then by `hs`.
pub fn run_ensemble_multi_h(
    model: ModelKind,
    m: usize,
    seed_base: u64,
    setup: &EnsembleSetup,
    hs: &[f64],
) -> Result<EnsembleTable> {
    if m == 0 {
        return Err(invalid("ensemble needs at least one sample"));
    }
    setup.bc.validate()?;
    let section = setup.effective_section(model)?;
    let mut spec = setup.field.clone();
    spec.length = setup.bc.length;
    let sampler = FieldSampler::new(spec)?;
    // (sample, None = 1D | Some(h index))
    let mut jobs: Vec<(usize, Option<usize>)> = Vec::new();
    for i in 0..m {
        if model != ModelKind::ThreeD {
            jobs.push((i, None));
        }
        if model != ModelKind::OneD {
            jobs.extend((0..hs.len()).map(|k| (i, Some(k))));
        }
    }
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(i, which)| {
            let seed = sample_seed(seed_base, i as u64);
            let (fid, h) = match which {
                None => ("1d", 0.0),
                Some(k) => ("3d", hs[k]),
            };
            let result = sampler.sample(seed).and_then(|s| {
                let r = match which {
                    None => effective_modulus_1d(&section, &s, &setup.bc, setup.n_elements_1d)?,
                    Some(_) => effective_modulus_3d(&section, &s, &setup.bc, h, &setup.solve3d)?,
                };
                Ok((r, phi_fingerprint(&s)))
            });
            match result {
                Ok((r, fp)) => Outcome::Row(EnergyRow::new(setup, i, seed, fid, h, &r), fp),
                Err(e) => Outcome::Failed(SampleFailure {
                    sample_id: i,
                    seed,
                    fidelity: fid.into(),
                    message: e.to_string(),
                }),
            }
        })
        .collect();
    let mut table = EnsembleTable::default();
    for o in outcomes {
        match o {
            Outcome::Row(r, fp) => {
                table
                    .fingerprints
                    .push((r.sample_id, r.fidelity.clone(), fp));
                table.rows.push(r);
            }
            Outcome::Failed(f) => {
                log::warn!(
                    "sample {} ({}) failed: {}",
                    f.sample_id,
                    f.fidelity,
                    f.message
                );
                table.failures.push(f);
            }
        }
    }
    check_failures(table.failures.len(), jobs.len())?;
    Ok(table)
}

pub fn run_ensemble(
    model: ModelKind,
    m: usize,
    seed_base: u64,
    setup: &EnsembleSetup,
) -> Result<EnsembleTable> {
    run_ensemble_multi_h(model, m, seed_base, setup, &[setup.h])
}

#[derive(Clone, Debug, PartialEq)]
pub struct McSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Sorted values.
    pub ecdf: Vec<f64>,
    /// Sorted `E − mean`.
    pub fluctuation_ecdf: Vec<f64>,
    pub l2_error_vs_ref: Option<f64>,
    pub seed_base: u64,
}

pub fn fluctuation_stats(
    values: &[f64],
    reference: Option<f64>,
    seed_base: u64,
) -> Result<McSummary> {
    if values.is_empty() {
        return Err(invalid("fluctuation statistics need at least one value"));
    }
    let m = mean(values);
    let fluct: Vec<f64> = values.iter().map(|v| v - m).collect();
    Ok(McSummary {
        n: values.len(),
        mean: m,
        variance: variance(values),
        ecdf: ecdf(values),
        fluctuation_ecdf: ecdf(&fluct),
        l2_error_vs_ref: reference.map(|r| l2_error(values, r)),
        seed_base,
    })
}

/// `|mean(E^{ε,h}) − mean(E^ε)|`
pub fn systematic_error(values_3d: &[f64], values_1d: &[f64]) -> Result<f64> {
    if values_3d.is_empty() || values_1d.is_empty() {
        return Err(invalid("systematic error needs two non-empty ensembles"));
    }
    Ok((mean(values_3d) - mean(values_1d)).abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiFidelityEstimate {
    /// `E^ε(ω_m) + Δ`
    pub shifted_values: Vec<f64>,
    /// Mean of `E^{ε,h} − E^ε` over the coupled pairs.
    pub delta: f64,
    /// Standard error of `delta`; zero for a single pair.
    pub delta_stderr: f64,
    pub n_high: usize,
}

/// Shifts the large 1D ensemble by the mean coupled gap.
pub fn multifidelity(
    values_1d: &[f64],
    coupled_pairs: &[(f64, f64)],
) -> Result<MultiFidelityEstimate> {
    if coupled_pairs.is_empty() {
        return Err(invalid(
            "multi-fidelity estimate needs at least one coupled pair",
        ));
    }
    let gaps: Vec<f64> = coupled_pairs.iter().map(|(e3, e1)| e3 - e1).collect();
    let delta = mean(&gaps);
    Ok(MultiFidelityEstimate {
        shifted_values: values_1d.iter().map(|v| v + delta).collect(),
        delta,
        delta_stderr: (variance(&gaps) / gaps.len() as f64).sqrt(),
        n_high: gaps.len(),
    })
}

#[derive(Clone, Debug)]
pub struct TrendReport {
    pub h: Vec<f64>,
    pub sys_error: Vec<f64>,
    /// `sys_error ≈ a·h^t`; `a = fit.prefactor`, `t = fit.slope`.
    pub fit: LogLogFit,
}

/// OLS fit of `ln err` against `ln h`; non-positive errors are excluded.
pub fn h_trend(h: &[f64], sys_error: &[f64]) -> Result<TrendReport> {
    if h.len() < 3 {
        return Err(invalid(format!(
            "h sweep needs at least three values, got {}",
            h.len()
        )));
    }
    let fit = fit_loglog(h, sys_error)?;
    for &i in &fit.excluded {
        log::warn!(
            "h = {} excluded from the trend fit: error {} is not positive",
            h[i],
            sys_error[i]
        );
    }
    Ok(TrendReport {
        h: h.to_vec(),
        sys_error: sys_error.to_vec(),
        fit,
    })
}

/// Coupled ensemble over an `h` grid and its systematic-error trend.
pub fn h_sweep(
    setup: &EnsembleSetup,
    hs: &[f64],
    m: usize,
    seed_base: u64,
) -> Result<(TrendReport, EnsembleTable)> {
    if hs.len() < 3 {
        return Err(invalid(format!(
            "h sweep needs at least three values, got {}",
            hs.len()
        )));
    }
    let table = run_ensemble_multi_h(ModelKind::Coupled, m, seed_base, setup, hs)?;
    let e1 = table.values("1d");
    let errs = hs
        .iter()
        .map(|&h| {
            let e3: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.fidelity == "3d" && r.h == h)
                .map(|r| r.e)
                .collect();
            systematic_error(&e3, &e1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((h_trend(hs, &errs)?, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_basics() {
        let s = fluctuation_stats(&[3.0; 4], Some(3.0), 1).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.l2_error_vs_ref, Some(0.0));
        let s = fluctuation_stats(&[0.0, 2.0], Some(1.0), 1).unwrap();
        assert_eq!(s.l2_error_vs_ref, Some(1.0));
        assert_eq!(s.fluctuation_ecdf, vec![-1.0, 1.0]);
    }

    #[test]
    fn multifidelity_shift() {
        let v1 = [1.0, 2.5, 4.0];
        let mf = multifidelity(&v1, &[(2.0, 1.5), (3.0, 2.0)]).unwrap();
        assert_eq!(mf.delta, 0.75);
        assert_eq!(mf.n_high, 2);
        assert!(multifidelity(&v1, &[]).is_err());
        let same = multifidelity(&v1, &[(2.0, 2.0)]).unwrap();
        assert_eq!(same.shifted_values, v1.to_vec());
    }

    #[test]
    fn trend_exponents() {
        let h = [0.25, 0.1, 0.05];
        assert!((h_trend(&h, &h).unwrap().fit.slope - 1.0).abs() < 1e-12);
        let r: Vec<f64> = h.iter().map(|v| v.sqrt()).collect();
        assert!((h_trend(&h, &r).unwrap().fit.slope - 0.5).abs() < 1e-12);
        assert!(h_trend(&h[..2], &h[..2]).is_err());
    }

    #[test]
    fn failure_threshold() {
        assert!(check_failures(5, 100).is_ok());
        assert!(check_failures(6, 100).is_err());
    }
}
