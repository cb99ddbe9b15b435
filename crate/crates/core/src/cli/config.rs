//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSpec, MaterialModel, MaterialSpec};
use crate::geometry::{make_disc, make_disc_mesh, make_polygon_section, CrossSection};
use crate::mc::{EnsembleSetup, ModelKind};
use crate::rod1d::RodBC;
use crate::rod3d::Solve3dConfig;

/// Env var naming the output directory when neither flag nor file sets one.
pub const OUTPUT_DIR_ENV: &str = "ROD_UQ_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "rod-uq-output";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub section: Option<SectionConfig>,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub bc: BcConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_experiment() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SectionConfig {
    /// Exact moments unless `meshed`; the 3D model always meshes with `rings`.
    Disc {
        radius: f64,
        #[serde(default)]
        meshed: bool,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        mesh_size: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub mu: f64,
    pub lambda: f64,
    pub model: MaterialModel,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            mu: 30.8,
            lambda: 66.6,
            model: MaterialModel::Deterministic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub eps: f64,
    /// Smallness bound `c_S`; absent disables clipping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            sigma1: 0.3,
            sigma2: 0.3,
            eps: 0.05,
            clip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub length: f64,
    pub t: [f64; 3],
    pub k0: f64,
    pub kl: f64,
    pub a0: [[f64; 2]; 2],
    pub al: [[f64; 2]; 2],
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            t: [1.0, 0.0, 0.0],
            k0: 0.0,
            kl: 0.0,
            a0: [[0.0; 2]; 2],
            al: [[0.0; 2]; 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub n_1d: usize,
    /// Field cells; defaults to `n_1d` for 1D-only runs and `n_layers` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
    pub n_layers: usize,
    pub rings: usize,
    pub h: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        let s = Solve3dConfig::default();
        Self {
            n_1d: 2000,
            n_cells: None,
            n_layers: s.n_layers,
            rings: s.rings,
            h: 0.1,
            tol: s.tol,
            max_iters: s.max_iters,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub samples: usize,
    pub seed_base: u64,
    /// Coupled 3D evaluations used for the multi-fidelity shift.
    pub n_high: usize,
    pub model: ModelKind,
    /// Sample evaluated by the single-solve commands.
    pub sample_id: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 250,
            seed_base: 42,
            n_high: 8,
            model: ModelKind::OneD,
            sample_id: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub h: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Flag, then file, then the env var, then the built-in default.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output_dir {
            return p.clone();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }

    pub fn section(&self) -> Result<CrossSection> {
        match &self.section {
            None => Err(Error::Config("missing [section]".into())),
            Some(SectionConfig::Disc {
                radius,
                meshed: false,
            }) => make_disc(*radius),
            Some(SectionConfig::Disc {
                radius,
                meshed: true,
            }) => make_disc_mesh(*radius, self.discretization.rings),
            Some(SectionConfig::Polygon {
                vertices,
                mesh_size,
            }) => make_polygon_section(vertices, *mesh_size),
        }
    }

    pub fn material(&self) -> MaterialSpec {
        MaterialSpec {
            mu0: self.material.mu,
            lambda0: self.material.lambda,
            model: self.material.model.clone(),
        }
    }

    pub fn bc(&self) -> Result<RodBC> {
        let b = &self.bc;
        let bc = RodBC {
            length: b.length,
            t: b.t,
            k0: b.k0,
            kl: b.kl,
            a0: b.a0,
            al: b.al,
        };
        bc.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(bc)
    }

    pub fn solve3d(&self) -> Solve3dConfig {
        let d = &self.discretization;
        Solve3dConfig {
            rings: d.rings,
            n_layers: d.n_layers,
            tol: d.tol,
            max_iters: d.max_iters,
        }
    }

    /// Field cells for a run of the given model.
    pub fn n_cells(&self, model: ModelKind) -> usize {
        self.discretization.n_cells.unwrap_or(match model {
            ModelKind::OneD => self.discretization.n_1d,
            _ => self.discretization.n_layers,
        })
    }

    pub fn field(&self, model: ModelKind) -> Result<FieldSpec> {
        let p = &self.perturbation;
        let spec = FieldSpec {
            length: self.bc.length,
            n_cells: self.n_cells(model),
            eps: p.eps,
            sigma1: p.sigma1,
            sigma2: p.sigma2,
            clip: p.clip,
            material: self.material(),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        let cells = spec.n_cells;
        if model != ModelKind::ThreeD && self.discretization.n_1d % cells != 0 {
            return Err(Error::Config(format!(
                "n_1d = {} is not a multiple of {cells} field cells",
                self.discretization.n_1d
            )));
        }
        if model != ModelKind::OneD && self.discretization.n_layers % cells != 0 {
            return Err(Error::Config(format!(
                "n_layers = {} is not a multiple of {cells} field cells",
                self.discretization.n_layers
            )));
        }
        Ok(spec)
    }

    pub fn ensemble_setup(&self, model: ModelKind) -> Result<EnsembleSetup> {
        Ok(EnsembleSetup {
            experiment: self.experiment.clone(),
            section: self.section()?,
            field: self.field(model)?,
            bc: self.bc()?,
            n_elements_1d: self.discretization.n_1d,
            h: self.discretization.h,
            solve3d: self.solve3d(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let c =
            ExperimentConfig::from_toml_str("[section]\nkind = \"disc\"\nradius = 1.0\n").unwrap();
        assert_eq!(c.material.mu, 30.8);
        assert_eq!(c.mc.seed_base, 42);
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_section_and_typos() {
        let c = ExperimentConfig::from_toml_str("experiment = \"x\"\n").unwrap();
        assert!(matches!(c.section(), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml_str("[bc]\nlenght = 1.0\n").is_err());
    }

    #[test]
    fn material_models_parse() {
        let text = r#"
[section]
kind = "disc"
radius = 0.7
[material]
mu = 30.8
lambda = 66.6
[material.model]
kind = "lognormal_transform"
sigma_mu = 0.2
upper_bounded = false
[material.model.lambda]
kind = "proportional"
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(!c.material().is_deterministic());
        let partial = ExperimentConfig::from_toml_str("[material.model]\nkind = \"deterministic\"\n").unwrap();
        assert_eq!(partial.material.mu, 30.8);
    }
}
