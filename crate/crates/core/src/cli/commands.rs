//! Subcommand implementations; each writes CSV files plus `manifest.toml`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fields::{sample_seed, FieldSample, FieldSampler, FieldSpec};
use crate::homog::{
    corrector_sweep, e0_closed_form, e0_system_solve, homogenized_coefficients, rate_sweep,
    RateSweepConfig,
};
use crate::mc::{
    fluctuation_stats, h_sweep, multifidelity, run_ensemble, EnergyRow, EnsembleSetup, ModelKind,
};
use crate::rod1d::{solve_with_energy, EnergyReport};
use crate::rod3d::{meshed_section, solve_with_energy_3d};
use crate::stats::{ecdf_eval, LogLogFit};

/// Writes `header` then `rows`, numbers already formatted.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal that round-trips the double.
fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    files: Vec<String>,
    /// Decimal strings; TOML integers stop at i64.
    seeds: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Output directory plus bookkeeping of written files.
pub struct Run<'a> {
    pub dir: PathBuf,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    files: Vec<PathBuf>,
    seeds: Vec<u64>,
}

impl<'a> Run<'a> {
    pub fn new(dir: PathBuf, command: &'a str, config: &'a ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command,
            config,
            files: Vec::new(),
            seeds: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let p = self.path(name);
        write_table(&p, header, rows)
    }

    fn energies(&mut self, rows: &[EnergyRow]) -> Result<()> {
        let p = self.path("energies.csv");
        crate::mc::write_energies_csv(&p, rows)
    }

    /// Writes the manifest and returns every file of the run.
    pub fn finish(mut self) -> Result<Vec<PathBuf>> {
        let manifest = self.dir.join("manifest.toml");
        let files = self
            .files
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect();
        let m = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            files,
            seeds: self.seeds.iter().map(u64::to_string).collect(),
            config: self.config,
        };
        let text = toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&manifest, text)?;
        self.files.push(manifest);
        Ok(self.files)
    }
}

fn single_row(
    cfg: &ExperimentConfig,
    id: usize,
    seed: u64,
    fidelity: &str,
    h: f64,
    eps: f64,
    r: &EnergyReport,
) -> EnergyRow {
    let t = r.terms.as_ref();
    EnergyRow {
        experiment: cfg.experiment.clone(),
        sample_id: id,
        seed,
        fidelity: fidelity.into(),
        h,
        eps,
        e: r.value,
        e_stretch: t.map(|t| t.stretch),
        e_twist: t.map(|t| t.twist),
        e_bend2: t.map(|t| t.bend2),
        e_bend3: t.map(|t| t.bend3),
        iters: r.iterations,
        residual: r.residual,
    }
}

fn draw(spec: FieldSpec, seed: u64) -> Result<FieldSample> {
    FieldSampler::new(spec)?.sample(seed)
}

pub fn cmd_solve1d(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    let mut run = Run::new(dir, "solve1d", cfg)?;
    let section = cfg.section()?;
    let bc = cfg.bc()?;
    let spec = cfg.field(ModelKind::OneD)?;
    let id = cfg.mc.sample_id;
    let seed = sample_seed(cfg.mc.seed_base, id as u64);
    let sample = draw(spec.clone(), seed)?;
    let (state, report) = solve_with_energy(&section, &sample, &bc, cfg.discretization.n_1d)?;
    run.seeds.push(seed);
    run.energies(&[single_row(cfg, id, seed, "1d", 0.0, spec.eps, &report)])?;
    let p = run.path("state1d.csv");
    state.write_csv(&p)?;
    let p = run.path("field.csv");
    sample.write_csv(&p)?;
    run.finish()
}

pub fn cmd_solve3d(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    let mut run = Run::new(dir, "solve3d", cfg)?;
    let section = meshed_section(&cfg.section()?, cfg.discretization.rings)?;
    let bc = cfg.bc()?;
    let spec = cfg.field(ModelKind::ThreeD)?;
    let id = cfg.mc.sample_id;
    let seed = sample_seed(cfg.mc.seed_base, id as u64);
    let sample = draw(spec.clone(), seed)?;
    let h = cfg.discretization.h;
    let (sys, u, report) = solve_with_energy_3d(&section, &sample, &bc, h, &cfg.solve3d())?;
    run.seeds.push(seed);
    run.energies(&[single_row(cfg, id, seed, "3d", h, spec.eps, &report)])?;
    let p = run.path("displacement.csv");
    u.write_csv(&sys.mesh, &p)?;
    run.path("mesh_nodes.csv");
    run.path("mesh_elements.csv");
    sys.mesh.write_csv(&run.dir, "mesh_")?;
    let p = run.path("field.csv");
    sample.write_csv(&p)?;
    run.finish()
}

pub fn cmd_proxy(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    let mut run = Run::new(dir, "proxy", cfg)?;
    let section = cfg.section()?;
    let bc = cfg.bc()?;
    let coeffs = homogenized_coefficients(&section, &cfg.field(ModelKind::OneD)?)?;
    let closed = e0_closed_form(&section, &coeffs, &bc);
    let system = e0_system_solve(&section, &coeffs, &bc, cfg.discretization.n_1d)?;
    let source = format!("{:?}", coeffs.source);
    let row = |method: &str, e: f64, residual: f64| {
        vec![
            method.to_string(),
            num(e),
            num(coeffs.a_hom),
            num(coeffs.mu_hom),
            num(coeffs.mean_phi[0]),
            num(coeffs.mean_phi[1]),
            source.clone(),
            num(residual),
        ]
    };
    run.table(
        "proxy.csv",
        &[
            "method",
            "E0",
            "a_hom",
            "mu_hom",
            "mean_phi1",
            "mean_phi2",
            "mean_source",
            "residual",
        ],
        &[
            row("closed_form", closed, 0.0),
            row("system", system.value, system.residual),
        ],
    )?;
    run.finish()
}

fn summary_rows(
    values: &[(&str, Vec<f64>)],
    reference: Option<f64>,
    seed_base: u64,
) -> Result<(Vec<Vec<String>>, Vec<Vec<String>>)> {
    let mut summary = Vec::new();
    let mut ecdf_rows = Vec::new();
    for (fid, v) in values {
        if v.is_empty() {
            continue;
        }
        let reference = if *fid == "1d" { reference } else { None };
        let s = fluctuation_stats(v, reference, seed_base)?;
        summary.push(vec![
            fid.to_string(),
            s.n.to_string(),
            num(s.mean),
            num(s.variance),
            s.l2_error_vs_ref.map(num).unwrap_or_default(),
            s.seed_base.to_string(),
        ]);
        for (k, (x, f)) in s.ecdf.iter().zip(&s.fluctuation_ecdf).enumerate() {
            ecdf_rows.push(vec![
                fid.to_string(),
                k.to_string(),
                num(*x),
                num(*f),
                num(ecdf_eval(&s.ecdf, *x)),
            ]);
        }
    }
    Ok((summary, ecdf_rows))
}

const SUMMARY_HEADER: [&str; 6] = [
    "fidelity",
    "n",
    "mean",
    "variance",
    "l2_error_vs_ref",
    "seed_base",
];
const ECDF_HEADER: [&str; 5] = ["fidelity", "rank", "E", "fluctuation", "F"];

fn reference_e0(setup: &EnsembleSetup, model: ModelKind) -> Result<f64> {
    let section = setup.effective_section(model)?;
    let coeffs = homogenized_coefficients(&section, &setup.field)?;
    Ok(e0_closed_form(&section, &coeffs, &setup.bc))
}

pub fn cmd_mc(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    let mut run = Run::new(dir, "mc", cfg)?;
    let model = cfg.mc.model;
    let setup = cfg.ensemble_setup(model)?;
    let table = run_ensemble(model, cfg.mc.samples, cfg.mc.seed_base, &setup)?;
    run.seeds = (0..cfg.mc.samples)
        .map(|i| sample_seed(cfg.mc.seed_base, i as u64))
        .collect();
    let e0 = reference_e0(&setup, model)?;
    let (summary, ecdf) = summary_rows(
        &[("1d", table.values("1d")), ("3d", table.values("3d"))],
        Some(e0),
        cfg.mc.seed_base,
    )?;
    run.energies(&table.rows)?;
    run.table("summary.csv", &SUMMARY_HEADER, &summary)?;
    run.table("ecdf.csv", &ECDF_HEADER, &ecdf)?;
    failures(&mut run, &table.failures)?;
    run.finish()
}

fn failures(run: &mut Run, f: &[crate::mc::SampleFailure]) -> Result<()> {
    if f.is_empty() {
        return Ok(());
    }
    let rows: Vec<Vec<String>> = f
        .iter()
        .map(|f| {
            vec![
                f.sample_id.to_string(),
                f.seed.to_string(),
                f.fidelity.clone(),
                f.message.clone(),
            ]
        })
        .collect();
    run.table(
        "failures.csv",
        &["sample_id", "seed", "fidelity", "message"],
        &rows,
    )
}

fn fit_row(name: &str, f: &LogLogFit) -> Vec<String> {
    vec![
        name.into(),
        num(f.slope),
        num(f.intercept),
        num(f.prefactor),
        num(f.slope_stderr),
        num(f.slope_ci),
        f.residuals.len().to_string(),
    ]
}

const FIT_HEADER: [&str; 7] = [
    "quantity",
    "slope",
    "intercept",
    "prefactor",
    "slope_stderr",
    "slope_ci95",
    "n_points",
];

pub fn cmd_rate_sweep(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    if cfg.sweep.eps.is_empty() {
        return Err(Error::Config(
            "rate-sweep needs a non-empty [sweep] eps list".into(),
        ));
    }
    let mut run = Run::new(dir, "rate-sweep", cfg)?;
    let rc = RateSweepConfig {
        section: cfg.section()?,
        field: cfg.field(ModelKind::OneD)?,
        bc: cfg.bc()?,
        eps: cfg.sweep.eps.clone(),
        n_elements: cfg.discretization.n_1d,
        n_samples: cfg.mc.samples,
        seed_base: cfg.mc.seed_base,
    };
    let report = rate_sweep(&rc)?;
    let corr = corrector_sweep(&rc)?;
    run.seeds = (0..cfg.mc.samples)
        .map(|i| sample_seed(cfg.mc.seed_base, i as u64))
        .collect();
    let rates: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| vec![num(p.eps), num(p.l2_error), p.n_samples.to_string()])
        .collect();
    run.table("rates.csv", &["eps", "l2_error", "n_samples"], &rates)?;
    let corr_rows: Vec<Vec<String>> = corr
        .points
        .iter()
        .map(|p| {
            vec![
                num(p.eps),
                num(p.psi_norm_mean),
                num(p.rve_rms_error),
                p.n_samples.to_string(),
            ]
        })
        .collect();
    run.table(
        "correctors.csv",
        &["eps", "psi_norm_mean", "rve_rms_error", "n_samples"],
        &corr_rows,
    )?;
    let mut fits = vec![
        fit_row("energy_l2_error", &report.fit),
        fit_row("psi_norm", &corr.psi_fit),
    ];
    if let Some(f) = &corr.rve_fit {
        fits.push(fit_row("rve_error", f));
    }
    run.table("rate_fit.csv", &FIT_HEADER, &fits)?;
    run.finish()
}

pub fn cmd_h_sweep(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    if cfg.sweep.h.len() < 3 {
        return Err(Error::Config(
            "h-sweep needs at least three [sweep] h values".into(),
        ));
    }
    let mut run = Run::new(dir, "h-sweep", cfg)?;
    let setup = cfg.ensemble_setup(ModelKind::Coupled)?;
    let (trend, table) = h_sweep(&setup, &cfg.sweep.h, cfg.mc.samples, cfg.mc.seed_base)?;
    run.seeds = (0..cfg.mc.samples)
        .map(|i| sample_seed(cfg.mc.seed_base, i as u64))
        .collect();
    let rows: Vec<Vec<String>> = trend
        .h
        .iter()
        .zip(&trend.sys_error)
        .map(|(h, e)| {
            vec![
                num(*h),
                num(*e),
                num(trend.fit.prefactor),
                num(trend.fit.slope),
            ]
        })
        .collect();
    run.table("trends.csv", &["h", "sys_error", "fit_a", "fit_t"], &rows)?;
    run.energies(&table.rows)?;
    failures(&mut run, &table.failures)?;
    run.finish()
}

pub fn cmd_multifidelity(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    if cfg.mc.n_high == 0 {
        return Err(Error::Config("n_high must be at least 1".into()));
    }
    let mut run = Run::new(dir, "multifidelity", cfg)?;
    let setup = cfg.ensemble_setup(ModelKind::Coupled)?;
    let coupled = run_ensemble(ModelKind::Coupled, cfg.mc.n_high, cfg.mc.seed_base, &setup)?;
    // 1D on the 3D mesh's section, so both fidelities see the same moments
    let mut setup_1d = setup.clone();
    setup_1d.section = setup.effective_section(ModelKind::Coupled)?;
    let low = run_ensemble(ModelKind::OneD, cfg.mc.samples, cfg.mc.seed_base, &setup_1d)?;
    run.seeds = (0..cfg.mc.samples.max(cfg.mc.n_high))
        .map(|i| sample_seed(cfg.mc.seed_base, i as u64))
        .collect();
    let v1 = low.values("1d");
    let est = multifidelity(&v1, &coupled.coupled_pairs())?;
    let mut rows: Vec<EnergyRow> = low.rows.clone();
    rows.extend(coupled.rows.iter().filter(|r| r.fidelity == "3d").cloned());
    run.energies(&rows)?;
    let mf_rows: Vec<Vec<String>> = low
        .rows
        .iter()
        .zip(&est.shifted_values)
        .map(|(r, s)| {
            vec![
                r.sample_id.to_string(),
                r.seed.to_string(),
                num(r.e),
                num(*s),
            ]
        })
        .collect();
    run.table(
        "multifidelity.csv",
        &["sample_id", "seed", "E_1d", "E_mf"],
        &mf_rows,
    )?;
    let s1 = fluctuation_stats(&v1, None, cfg.mc.seed_base)?;
    let smf = fluctuation_stats(&est.shifted_values, None, cfg.mc.seed_base)?;
    run.table(
        "mf_summary.csv",
        &[
            "delta",
            "delta_stderr",
            "n_high",
            "mean_1d",
            "mean_mf",
            "variance_1d",
            "variance_mf",
        ],
        &[vec![
            num(est.delta),
            num(est.delta_stderr),
            est.n_high.to_string(),
            num(s1.mean),
            num(smf.mean),
            num(s1.variance),
            num(smf.variance),
        ]],
    )?;
    failures(
        &mut run,
        &low.failures
            .iter()
            .chain(&coupled.failures)
            .cloned()
            .collect::<Vec<_>>(),
    )?;
    run.finish()
}

pub fn cmd_section_info(cfg: &ExperimentConfig, dir: PathBuf) -> Result<Vec<PathBuf>> {
    let mut run = Run::new(dir, "section-info", cfg)?;
    let s = cfg.section()?;
    let c = s.centering_moments();
    let mut rows = vec![
        vec!["area".to_string(), num(s.area)],
        vec!["I2".into(), num(s.i2)],
        vec!["I3".into(), num(s.i3)],
        vec!["J".into(), num(s.j)],
        vec!["diameter".into(), num(s.diameter())],
        vec!["int_x2".into(), num(c[0])],
        vec!["int_x3".into(), num(c[1])],
        vec!["int_x2x3".into(), num(c[2])],
    ];
    if let Some(m) = &s.mesh {
        rows.push(vec!["nodes".into(), m.n_nodes().to_string()]);
        rows.push(vec!["triangles".into(), m.n_triangles().to_string()]);
    }
    run.table("section.csv", &["quantity", "value"], &rows)?;
    if let (Some(m), Some(phi)) = (&s.mesh, &s.phi_aff) {
        run.path("section_nodes.csv");
        run.path("section_elements.csv");
        m.write_csv(&run.dir, "section_")?;
        let rows: Vec<Vec<String>> = m
            .nodes
            .iter()
            .zip(phi)
            .map(|(p, f)| vec![num(p[0]), num(p[1]), num(*f)])
            .collect();
        run.table("torsion.csv", &["x2", "x3", "phi"], &rows)?;
    }
    run.finish()
}
