//! Run configuration (TOML). The schema is documented in
//! `docs/config_schema.md`; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelPreset;
use crate::collision::CollisionModel;
use crate::error::{KineticError, Result};
use crate::grid::{ModelKind, VelocityGrid, WeightSpec};
use crate::torus::{Preset, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub flags: FlagsConfig,
    #[serde(default)]
    pub seed: u64,
    /// Rayon worker threads; 1 gives bit-deterministic runs.
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// "landau" or "boltzmann".
    pub kind: String,
    #[serde(default)]
    pub gamma: f64,
    /// Angular singularity order (Boltzmann only).
    #[serde(default)]
    pub s: Option<f64>,
    /// Grazing cutoff angle (Boltzmann only).
    #[serde(default)]
    pub theta_min: Option<f64>,
}

impl ModelConfig {
    pub fn model_kind(&self) -> Result<ModelKind> {
        match self.kind.as_str() {
            "landau" => Ok(ModelKind::Landau),
            "boltzmann" => Ok(ModelKind::Boltzmann),
            other => Err(KineticError::Config(format!("model.kind '{other}' is not 'landau' or 'boltzmann'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// "torus" or "channel".
    #[serde(default = "torus")]
    pub kind: String,
    #[serde(default = "two")]
    pub k_max: i64,
    #[serde(default = "n_x1")]
    pub n_x1: usize,
    #[serde(default = "two")]
    pub kbar_max: i64,
    /// "specular" or "inflow".
    #[serde(default = "specular")]
    pub bc: String,
    /// Size of the inflow preset data.
    #[serde(default)]
    pub inflow_amplitude: f64,
    /// Inflow data file (CSV of `BoundaryRow`); replaces the preset.
    #[serde(default)]
    pub boundary_file: Option<PathBuf>,
}

fn torus() -> String {
    "torus".into()
}
fn two() -> i64 {
    2
}
fn n_x1() -> usize {
    32
}
fn specular() -> String {
    "specular".into()
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { kind: torus(), k_max: 2, n_x1: 32, kbar_max: 2, bc: specular(), inflow_amplitude: 0.0, boundary_file: None }
    }
}

impl DomainConfig {
    pub fn is_channel(&self) -> bool {
        self.kind == "channel"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "n_per_dim")]
    pub n_per_dim: usize,
    #[serde(default = "v_max")]
    pub v_max: f64,
}

fn n_per_dim() -> usize {
    12
}
fn v_max() -> f64 {
    6.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_per_dim: 12, v_max: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default)]
    pub q: f64,
    #[serde(default = "theta")]
    pub theta: f64,
}

fn theta() -> f64 {
    1.0
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { q: 0.0, theta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "dt")]
    pub dt: f64,
    #[serde(default = "t_final")]
    pub t_final: f64,
    /// "explicit_rk2", "imex_euler" or "imex_strang".
    #[serde(default = "scheme")]
    pub scheme: String,
}

fn dt() -> f64 {
    0.01
}
fn t_final() -> f64 {
    1.0
}
fn scheme() -> String {
    "imex_euler".into()
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt: dt(), t_final: t_final(), scheme: scheme() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Torus: "single_mode_micro", "random_micro", "macro_wave".
    /// Channel: "symmetric_bump", "quiet".
    #[serde(default = "preset")]
    pub preset: String,
    #[serde(default = "amplitude")]
    pub amplitude: f64,
}

fn preset() -> String {
    "random_micro".into()
}
fn amplitude() -> f64 {
    1e-2
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { preset: preset(), amplitude: amplitude() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    /// Record norms and a CSV row every this many steps.
    #[serde(default = "ten")]
    pub record_every: usize,
    /// Write a checkpoint every this many steps; 0 writes only the final one.
    #[serde(default)]
    pub checkpoint_every: usize,
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn ten() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: out_dir(), record_every: 10, checkpoint_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagsConfig {
    #[serde(default = "yes")]
    pub nonlinear: bool,
    /// Remove the macroscopic part of `k = 0` after each torus step.
    #[serde(default)]
    pub reproject: bool,
    /// Record the D-norm dissipation; defaults to true for Landau and false
    /// for Boltzmann, where it is expensive.
    #[serde(default)]
    pub record_dnorm: Option<bool>,
    /// Largest velocity grid (`n_per_dim^3`) for which a dense `L` may be
    /// built; implicit schemes fail beyond it.
    #[serde(default = "dense_budget")]
    pub dense_max_nodes: usize,
}

fn yes() -> bool {
    true
}
fn dense_budget() -> usize {
    4096
}

impl Default for FlagsConfig {
    fn default() -> Self {
        Self { nonlinear: true, reproject: false, record_dnorm: None, dense_max_nodes: dense_budget() }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| KineticError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| KineticError::Config(e.to_string()))
    }

    pub fn weight_spec(&self) -> Result<WeightSpec> {
        Ok(WeightSpec {
            q: self.weight.q,
            theta: self.weight.theta,
            model_kind: self.model.model_kind()?,
            gamma: self.model.gamma,
            s: self.model.s.unwrap_or(0.0),
        })
    }

    pub fn scheme(&self) -> Result<Scheme> {
        Scheme::from_str(&self.time.scheme)
    }

    pub fn record_dnorm(&self) -> bool {
        self.flags.record_dnorm.unwrap_or(self.model.kind == "landau")
    }

    /// Checks every precondition that does not need an allocation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KineticError::Config(m));
        let kind = self.model.model_kind()?;
        match kind {
            ModelKind::Landau => {
                if self.model.s.is_some() || self.model.theta_min.is_some() {
                    return bad("model.s and model.theta_min apply to boltzmann only".into());
                }
            }
            ModelKind::Boltzmann => {
                if self.model.s.is_none() {
                    return bad("boltzmann model needs model.s".into());
                }
                let tm = self.model.theta_min.unwrap_or(0.1);
                if !(tm > 0.0 && tm < std::f64::consts::FRAC_PI_2) {
                    return bad(format!("model.theta_min = {tm} outside (0, pi/2)"));
                }
            }
        }
        self.weight_spec()?.validate()?;
        if self.grid.n_per_dim < 8 || self.grid.n_per_dim % 2 != 0 || !(self.grid.v_max > 0.0) {
            return bad(format!("grid n_per_dim = {} must be even and >= 8 with v_max > 0", self.grid.n_per_dim));
        }
        if !(self.time.dt > 0.0) || !(self.time.t_final >= self.time.dt) {
            return bad(format!("time: need 0 < dt <= t_final, got dt = {}, t_final = {}", self.time.dt, self.time.t_final));
        }
        let scheme = self.scheme().map_err(|e| KineticError::Config(e.to_string()))?;
        let nodes = self.grid.n_per_dim.pow(3);
        let needs_dense = scheme.is_implicit() || self.domain.is_channel() || self.model.kind == "boltzmann";
        if needs_dense && nodes > self.flags.dense_max_nodes {
            return bad(format!(
                "dense L for {nodes} velocity nodes exceeds flags.dense_max_nodes = {}",
                self.flags.dense_max_nodes
            ));
        }
        if !(self.initial.amplitude >= 0.0) {
            return bad(format!("initial.amplitude = {} must be nonnegative", self.initial.amplitude));
        }
        if self.output.record_every == 0 {
            return bad("output.record_every must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        match self.domain.kind.as_str() {
            "torus" => {
                if self.domain.k_max < 0 {
                    return bad("domain.k_max must be nonnegative".into());
                }
                Preset::from_str(&self.initial.preset).map_err(|e| KineticError::Config(e.to_string()))?;
            }
            "channel" => {
                if self.domain.n_x1 < 4 || self.domain.n_x1 % 2 != 0 {
                    return bad(format!("domain.n_x1 = {} must be even and >= 4", self.domain.n_x1));
                }
                if self.domain.kbar_max < 0 {
                    return bad("domain.kbar_max must be nonnegative".into());
                }
                if !matches!(self.domain.bc.as_str(), "specular" | "inflow") {
                    return bad(format!("domain.bc '{}' is not 'specular' or 'inflow'", self.domain.bc));
                }
                if self.domain.boundary_file.is_some() && self.domain.bc != "inflow" {
                    return bad("domain.boundary_file needs bc = \"inflow\"".into());
                }
                if scheme != Scheme::ImexEuler {
                    return bad("channel runs use scheme = \"imex_euler\"".into());
                }
                ChannelPreset::from_str(&self.initial.preset).map_err(|e| KineticError::Config(e.to_string()))?;
            }
            other => return bad(format!("domain.kind '{other}' is not 'torus' or 'channel'")),
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.grid.n_per_dim, self.grid.v_max)
    }

    pub fn build_model(&self) -> Result<CollisionModel> {
        let grid = self.build_grid()?;
        match self.model.model_kind()? {
            ModelKind::Landau => CollisionModel::landau(grid, self.model.gamma),
            ModelKind::Boltzmann => {
                CollisionModel::boltzmann(grid, self.model.gamma, self.model.s.unwrap_or(0.0), self.model.theta_min.unwrap_or(0.1))
            }
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml(&text)
}
