//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::DiagOptions;
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};
use crate::ground_state::{FlowOptions, SeedProfile};
use crate::params::ModelParams;
use crate::potential::PotentialSpec;
use crate::propagator::DEFAULT_CT;

pub const SCHEMA: &str = "choquard-experiment/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "N")]
    pub dim: usize,
    pub theta: f64,
    pub p: f64,
    pub gamma: f64,
    pub eps: f64,
    /// Replaced by the extracted multiplier once a ground state is known.
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one")]
    pub m: f64,
    pub v: Vec<f64>,
}

/// Grid of the ground-state profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// Target charge `‖U‖²`.
    pub nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtau: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_width: Option<f64>,
    /// Relative amplitude of seeded multiplicative noise on the initial profile.
    #[serde(default)]
    pub seed_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_ct")]
    pub c_t: f64,
    #[serde(default = "one_usize")]
    pub callback_stride: usize,
    /// Physical box half-width.
    #[serde(rename = "L")]
    pub extent: f64,
    pub n: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Concentration radius in profile units; 8 half-widths when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_hat: Option<f64>,
    #[serde(default = "default_classical_dt")]
    pub classical_dt: f64,
    /// Level at which the initial data are tested for admissibility.
    #[serde(rename = "K", default = "default_level")]
    pub admissibility_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    /// Points per axis at the largest ε (rounded up to a power of two).
    pub n_ref: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    /// Steps between ψ snapshots; 0 disables them.
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_dir(), snapshot_stride: 0 }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iters() -> usize {
    200_000
}
fn default_ct() -> f64 {
    DEFAULT_CT
}
fn default_lambda() -> f64 {
    0.01
}
fn default_classical_dt() -> f64 {
    1e-3
}
fn default_level() -> f64 {
    10.0
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Sections a subcommand needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Evolve,
    Sweep,
    Check,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner().message()))
        })?;
        if cfg.schema != SCHEMA {
            return Err(Error::Config(format!("schema: expected \"{SCHEMA}\", found \"{}\"", cfg.schema)));
        }
        if cfg.grid.dim != cfg.model.dim {
            return Err(Error::Config(format!("grid.dim = {} but model.N = {}", cfg.grid.dim, cfg.model.dim)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn require(&self, cmd: Command) -> Result<()> {
        let missing = |s: &str| Err(Error::Config(format!("section [{s}] is required for this command")));
        let needs_flow = !matches!(cmd, Command::Check);
        if needs_flow && self.flow.is_none() {
            return missing("flow");
        }
        if matches!(cmd, Command::Evolve | Command::Sweep | Command::Check) && self.potential.is_none() {
            return missing("potential");
        }
        if matches!(cmd, Command::Evolve | Command::Sweep) && self.evolve.is_none() {
            return missing("evolve");
        }
        if cmd == Command::Sweep && self.sweep.is_none() {
            return missing("sweep");
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.dim, m.theta, m.p, m.gamma, m.eps, m.omega, m.m, m.v.clone())
    }

    pub fn profile_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.extent, self.grid.n)
    }

    pub fn evolve_grid(&self) -> Result<GridSpec> {
        let e = self.evolve.as_ref().ok_or_else(|| Error::Config("missing [evolve]".into()))?;
        GridSpec::new(self.model.dim, e.extent, e.n)
    }

    /// Flow options on the profile grid; noise (if any) drawn from `seed`.
    pub fn flow_options(&self) -> Result<FlowOptions> {
        let f = self.flow.as_ref().ok_or_else(|| Error::Config("missing [flow]".into()))?;
        let grid = self.profile_grid()?;
        let mut opts = FlowOptions::defaults(&grid);
        if let Some(d) = f.dtau {
            opts.dtau = d;
        }
        opts.tol = f.tol;
        opts.max_iters = f.max_iters;
        let width = f.seed_width.unwrap_or(grid.extent / 6.0);
        opts.seed = SeedProfile::Gaussian { width, center: vec![0.0; grid.dim] };
        if f.seed_noise > 0.0 {
            if f.seed_noise >= 1.0 {
                return Err(Error::Config("flow.seed_noise must be below 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let w2 = 2.0 * width * width;
            let vals: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    let r2: f64 = x[..grid.dim].iter().map(|t| t * t).sum();
                    (-r2 / w2).exp() * (1.0 + f.seed_noise * rng.random_range(-1.0..1.0))
                })
                .collect();
            opts.seed = SeedProfile::Field(ScalarField::from_real(grid, vals)?);
        }
        Ok(opts)
    }

    pub fn diag_options(&self, profile: &ScalarField) -> DiagOptions {
        let mut d = DiagOptions::for_profile(profile);
        if let Some(e) = &self.evolve {
            d.lambda = e.lambda;
            if let Some(r) = e.r_hat {
                d.r_hat = r;
            }
        }
        d
    }

    /// Two-dimensional harmonic preset used by the examples.
    pub fn preset_2d() -> Self {
        ExperimentConfig {
            schema: SCHEMA.into(),
            seed: 1,
            model: ModelSection { dim: 2, theta: 1.0, p: 2.0, gamma: 1.25, eps: 0.5, omega: 1.0, m: 1.0, v: vec![0.5, 0.0] },
            grid: GridSection { dim: 2, n: 128, extent: 8.0 },
            potential: Some(PotentialSpec::harmonic()),
            flow: Some(FlowSection {
                nu: 10.0,
                dtau: Some(0.05),
                tol: 1e-9,
                max_iters: 200_000,
                seed_width: Some(1.0),
                seed_noise: 0.0,
            }),
            evolve: Some(EvolveSection {
                horizon: 2.0,
                c_t: DEFAULT_CT,
                callback_stride: 10,
                extent: 4.0,
                n: 256,
                lambda: 0.01,
                r_hat: None,
                classical_dt: 1e-3,
                admissibility_level: 10.0,
            }),
            sweep: Some(SweepSection { eps: vec![0.5, 0.35, 0.25], n_ref: 160 }),
            output: OutputSection::default(),
        }
    }

    /// Three-dimensional case `N = 3, θ = 2, p = 2, γ = 3`.
    pub fn preset_3d() -> Self {
        ExperimentConfig {
            schema: SCHEMA.into(),
            seed: 1,
            model: ModelSection { dim: 3, theta: 2.0, p: 2.0, gamma: 3.0, eps: 0.5, omega: 1.0, m: 1.0, v: vec![0.5, 0.0, 0.0] },
            grid: GridSection { dim: 3, n: 64, extent: 320.0 },
            potential: Some(PotentialSpec::harmonic()),
            flow: Some(FlowSection {
                nu: 1.0,
                dtau: Some(100.0),
                tol: 3e-11,
                max_iters: 20_000,
                seed_width: Some(30.0),
                seed_noise: 0.0,
            }),
            evolve: None,
            sweep: None,
            output: OutputSection::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for cfg in [ExperimentConfig::preset_2d(), ExperimentConfig::preset_3d()] {
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml().unwrap(), text);
            assert!(cfg.model_params().unwrap().validate().is_ok());
        }
    }

    #[test]
    fn minimal_file_with_defaults() {
        let text = r#"
schema = "choquard-experiment/1"
[model]
N = 3
theta = 2.0
p = 2.0
gamma = 3.0
eps = 0.5
v = [0.0, 0.0, 0.0]
[grid]
dim = 3
n = 32
L = 10.0
[flow]
nu = 1.0
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.model.omega, 1.0);
        assert_eq!(cfg.flow.as_ref().unwrap().tol, 1e-8);
        assert_eq!(cfg.output.directory, PathBuf::from("out"));
        let p = cfg.model_params().unwrap();
        assert!((p.beta - 2.0).abs() < 1e-15 && (p.alpha - 9.0).abs() < 1e-12);
        assert!(cfg.require(Command::GroundState).is_ok());
        assert!(matches!(cfg.require(Command::Evolve), Err(Error::Config(m)) if m.contains("potential")));
        let o = cfg.flow_options().unwrap();
        assert!((o.dtau - 0.1 * (20.0f64 / 32.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_key() {
        let mut text = ExperimentConfig::preset_2d().to_toml().unwrap();
        text = text.replace("theta = 1.0", "theta = \"one\"");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("model.theta"), "{err}");
        let text = ExperimentConfig::preset_2d().to_toml().unwrap().replace("[grid]", "[grid]\nspacing = 1.0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("grid.spacing"), "{err}");
        let text = ExperimentConfig::preset_2d().to_toml().unwrap().replace(SCHEMA, "choquard-experiment/0");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn noisy_seed_is_deterministic() {
        let mut cfg = ExperimentConfig::preset_2d();
        cfg.flow.as_mut().unwrap().seed_noise = 0.1;
        let a = cfg.flow_options().unwrap();
        let b = cfg.flow_options().unwrap();
        let (SeedProfile::Field(fa), SeedProfile::Field(fb)) = (&a.seed, &b.seed) else { panic!("noisy seed is a field") };
        assert_eq!(fa, fb);
        cfg.seed = 2;
        let SeedProfile::Field(fc) = cfg.flow_options().unwrap().seed else { panic!() };
        assert_ne!(fa, &fc);
    }
}
