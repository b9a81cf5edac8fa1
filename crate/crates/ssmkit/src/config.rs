//! Job configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssmkit_core::beam::{assemble_beam, BeamParams};
use ssmkit_core::linalg::RMat;
use ssmkit_core::model::ShawPierreVariant;
use ssmkit_core::ode::Tolerances;
use ssmkit_core::validation::{Coordinates, InvarianceOptions, Method};
use ssmkit_core::{make_shaw_pierre, ForceTerm, MechanicalSystem, ModeSelector, ShawPierre};

/// Malformed or inconsistent configuration.
#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub master_mode: MasterMode,
    #[serde(default = "defaults::order")]
    pub order: usize,
    /// Orders swept by `invariance` and `plot-data`; `[order]` when empty.
    #[serde(default)]
    pub orders: Vec<usize>,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default = "defaults::rho0")]
    pub rho0: f64,
    #[serde(default = "defaults::rho_eps")]
    pub rho_eps: f64,
    /// Multiplies every radius in the file (`rho0`, `rho_eps`, the backbone
    /// grid). Lets radii quoted for another eigenvector normalization be
    /// used verbatim.
    #[serde(default = "defaults::one")]
    pub rho_scale: f64,
    #[serde(default = "defaults::n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub theta_seed: Option<u64>,
    #[serde(default = "defaults::n_theta")]
    pub n_theta: usize,
    #[serde(default)]
    pub backbone: BackboneGrid,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default = "defaults::outputs")]
    pub outputs: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn order() -> usize {
        5
    }
    pub fn delta() -> f64 {
        0.05
    }
    pub fn rho0() -> f64 {
        0.35
    }
    pub fn rho_eps() -> f64 {
        0.01
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn n_traj() -> usize {
        50
    }
    pub fn n_theta() -> usize {
        256
    }
    pub fn outputs() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn rho_step() -> f64 {
        0.005
    }
    pub fn rtol() -> f64 {
        1e-10
    }
    pub fn atol() -> f64 {
        1e-12
    }
    pub fn min_grid() -> usize {
        500
    }
    pub fn points_per_period() -> f64 {
        40.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn max_steps() -> usize {
        5_000_000
    }
}

/// `"slowest"` or a one-based spectrum position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MasterMode {
    Index(usize),
    Named(Slowest),
}

impl Default for MasterMode {
    fn default() -> Self {
        MasterMode::Named(Slowest::Slowest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slowest {
    Slowest,
}

impl MasterMode {
    pub fn selector(self) -> ModeSelector {
        match self {
            MasterMode::Index(k) => ModeSelector::Index(k),
            MasterMode::Named(_) => ModeSelector::Slowest,
        }
    }
}

/// Radii at which the backbone curve is sampled: `0, step, …, rho_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneGrid {
    /// Defaults to `rho0`.
    #[serde(default)]
    pub rho_max: Option<f64>,
    #[serde(default = "defaults::rho_step")]
    pub rho_step: f64,
}

impl Default for BackboneGrid {
    fn default() -> Self {
        BackboneGrid {
            rho_max: None,
            rho_step: defaults::rho_step(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default = "defaults::rtol")]
    pub rtol: f64,
    #[serde(default = "defaults::atol")]
    pub atol: f64,
    #[serde(default = "defaults::yes")]
    pub scale_atol: bool,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default)]
    pub coordinates: CoordinateName,
    #[serde(default = "defaults::min_grid")]
    pub min_grid: usize,
    #[serde(default = "defaults::points_per_period")]
    pub points_per_period: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            rtol: defaults::rtol(),
            atol: defaults::atol(),
            scale_atol: true,
            max_steps: defaults::max_steps(),
            method: MethodName::Auto,
            coordinates: CoordinateName::Physical,
            min_grid: defaults::min_grid(),
            points_per_period: defaults::points_per_period(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Auto,
    Explicit,
    Implicit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateName {
    #[default]
    Physical,
    Modal,
}

/// Either a built-in model or explicit matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[serde(try_from = "serde_json::Value")]
pub enum ModelConfig {
    Builtin(BuiltinModel),
    Matrices(MatrixModel),
}

impl TryFrom<serde_json::Value> for ModelConfig {
    type Error = String;

    fn try_from(mut v: serde_json::Value) -> Result<Self, String> {
        let obj = v.as_object_mut().ok_or("`model` must be an object")?;
        if obj.contains_key("builtin") {
            obj.entry("params").or_insert_with(|| serde_json::json!({}));
            serde_json::from_value(v)
                .map(ModelConfig::Builtin)
                .map_err(|e| e.to_string())
        } else if obj.contains_key("matrices") {
            serde_json::from_value(v)
                .map(ModelConfig::Matrices)
                .map_err(|e| e.to_string())
        } else {
            Err("`model` needs either `builtin` or `matrices`".into())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinModel {
    ShawPierreInner(InnerParams),
    ShawPierreOuter(OuterParams),
    TimoshenkoBeam(BeamConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerParams {
    pub k: f64,
    pub c: f64,
    pub kappa: f64,
    pub m: f64,
}

impl Default for InnerParams {
    fn default() -> Self {
        InnerParams {
            k: 1.0,
            c: 0.03,
            kappa: 0.5,
            m: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub c: f64,
    pub kappa: f64,
    pub m: f64,
}

impl Default for OuterParams {
    fn default() -> Self {
        OuterParams {
            k1: 1.0,
            k2: 4.005,
            k3: 1.0,
            c: 0.4,
            kappa: 0.5,
            m: 1.0,
        }
    }
}

/// Cantilever parameters in mm, MPa and kg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub elements: usize,
    pub length: f64,
    pub height: f64,
    pub width: f64,
    pub density: f64,
    pub young: f64,
    pub shear: f64,
    pub eta: f64,
    pub mu: f64,
    pub lambda_ext: f64,
    pub reduced_integration: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        let p = BeamParams::reference(3);
        BeamConfig {
            elements: p.elements,
            length: p.length,
            height: p.height,
            width: p.width,
            density: p.density,
            young: p.young,
            shear: p.shear,
            eta: p.eta,
            mu: p.mu,
            lambda_ext: p.lambda_ext,
            reduced_integration: p.reduced_integration,
        }
    }
}

impl From<BeamConfig> for BeamParams {
    fn from(b: BeamConfig) -> Self {
        BeamParams {
            length: b.length,
            height: b.height,
            width: b.width,
            density: b.density,
            young: b.young,
            shear: b.shear,
            eta: b.eta,
            mu: b.mu,
            lambda_ext: b.lambda_ext,
            elements: b.elements,
            reduced_integration: b.reduced_integration,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixModel {
    pub matrices: Matrices,
    #[serde(default)]
    pub nonlinear_terms: Vec<TermConfig>,
}

/// Square matrices as lists of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrices {
    pub mass: Vec<Vec<f64>>,
    pub damping: Vec<Vec<f64>>,
    pub stiffness: Vec<Vec<f64>>,
}

/// `coefficient · Π x_k^{exponents[k]}` acting on `dof`, with
/// `x = (y, ẏ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub dof: usize,
    pub coefficient: f64,
    pub exponents: Vec<u8>,
}

fn square(name: &str, rows: &[Vec<f64>]) -> Result<RMat, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad(format!("matrix `{name}` must be square and non-empty")));
    }
    Ok(RMat::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

impl ModelConfig {
    /// Builds the mechanical system. Solver-side validation errors are
    /// passed through unchanged.
    pub fn build(&self) -> anyhow::Result<MechanicalSystem> {
        Ok(match self {
            ModelConfig::Builtin(BuiltinModel::ShawPierreInner(p)) => make_shaw_pierre(
                ShawPierreVariant::Inner,
                ShawPierre {
                    m: p.m,
                    ..ShawPierre::inner(p.k, p.c, p.kappa)
                },
            )?,
            ModelConfig::Builtin(BuiltinModel::ShawPierreOuter(p)) => make_shaw_pierre(
                ShawPierreVariant::Outer,
                ShawPierre {
                    k1: p.k1,
                    k2: p.k2,
                    k3: p.k3,
                    c: p.c,
                    kappa: p.kappa,
                    m: p.m,
                },
            )?,
            ModelConfig::Builtin(BuiltinModel::TimoshenkoBeam(b)) => assemble_beam((*b).into())?.sys,
            ModelConfig::Matrices(m) => {
                let mass = square("mass", &m.matrices.mass)?;
                let damping = square("damping", &m.matrices.damping)?;
                let stiffness = square("stiffness", &m.matrices.stiffness)?;
                let forces = m
                    .nonlinear_terms
                    .iter()
                    .map(|t| ForceTerm::new(t.dof, t.coefficient, t.exponents.clone()))
                    .collect();
                MechanicalSystem::new(mass, damping, stiffness, forces)?
            }
        })
    }

    /// Name recorded in outputs.
    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Builtin(BuiltinModel::ShawPierreInner(_)) => "shaw_pierre_inner",
            ModelConfig::Builtin(BuiltinModel::ShawPierreOuter(_)) => "shaw_pierre_outer",
            ModelConfig::Builtin(BuiltinModel::TimoshenkoBeam(_)) => "timoshenko_beam",
            ModelConfig::Matrices(_) => "matrices",
        }
    }
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: JobConfig = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.order == 0 {
            return Err(bad("`order` must be at least 1"));
        }
        if self.orders.contains(&0) {
            return Err(bad("`orders` entries must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(bad("`delta` must lie in (0, 1]"));
        }
        if !(self.rho_scale > 0.0) || !self.rho_scale.is_finite() {
            return Err(bad("`rho_scale` must be positive"));
        }
        if !(self.rho_eps > 0.0 && self.rho_eps < self.rho0) {
            return Err(bad("radii must satisfy 0 < rho_eps < rho0"));
        }
        if self.n_traj == 0 {
            return Err(bad("`n_traj` must be at least 1"));
        }
        if self.n_theta == 0 {
            return Err(bad("`n_theta` must be at least 1"));
        }
        if !(self.backbone.rho_step > 0.0) {
            return Err(bad("`backbone.rho_step` must be positive"));
        }
        if let Some(r) = self.backbone.rho_max {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(bad("`backbone.rho_max` must be non-negative"));
            }
        }
        let i = &self.integration;
        if !(i.rtol > 0.0 && i.atol > 0.0) {
            return Err(bad("integration tolerances must be positive"));
        }
        Ok(())
    }

    /// Orders swept by `invariance` and `plot-data`.
    pub fn order_list(&self) -> Vec<usize> {
        if self.orders.is_empty() {
            vec![self.order]
        } else {
            self.orders.clone()
        }
    }

    /// Backbone radii `0, step, …` up to `rho_max`, before `rho_scale`.
    pub fn backbone_grid(&self) -> Vec<f64> {
        let rho_max = self.backbone.rho_max.unwrap_or(self.rho0);
        let step = self.backbone.rho_step;
        let n = (rho_max / step + 1e-9).floor() as usize;
        (0..=n).map(|k| (k as f64 * step).min(rho_max)).collect()
    }

    pub fn invariance_options(&self) -> InvarianceOptions {
        let i = &self.integration;
        InvarianceOptions {
            rho0: self.rho0 * self.rho_scale,
            rho_eps: self.rho_eps * self.rho_scale,
            n_traj: self.n_traj,
            jitter_seed: self.theta_seed,
            coordinates: match i.coordinates {
                CoordinateName::Physical => Coordinates::Physical,
                CoordinateName::Modal => Coordinates::Modal,
            },
            min_grid: i.min_grid,
            points_per_period: i.points_per_period,
            tol: Tolerances {
                rtol: i.rtol,
                atol: i.atol,
                max_steps: i.max_steps,
            },
            scale_atol: i.scale_atol,
            method: match i.method {
                MethodName::Auto => Method::Auto,
                MethodName::Explicit => Method::Explicit,
                MethodName::Implicit => Method::Implicit,
            },
        }
    }
}
