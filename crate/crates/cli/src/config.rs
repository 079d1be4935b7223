//! Experiment configuration files.
//!
//! A config is a single TOML document. Every table rejects unknown keys;
//! everything except `geometry.kind` has a default, and the fully resolved
//! config is written beside each run's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Current schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub trial: TrialConfig,
    #[serde(default)]
    pub nitsche: NitscheConfig,
    #[serde(default)]
    pub ghost: GhostConfig,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub nn: NnConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseConfig>,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn center() -> [f64; 2] {
    [0.5, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometryConfig {
    Disk {
        #[serde(default = "center")]
        center: [f64; 2],
        radius: f64,
    },
    Flower {
        #[serde(default = "center")]
        center: [f64; 2],
    },
    Halfplane {
        origin: [f64; 2],
        normal: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// `[[x_lo, y_lo], [x_hi, y_hi]]`.
    #[serde(rename = "box")]
    pub bbox: [[f64; 2]; 2],
    pub nx: usize,
    pub ny: usize,
    /// Cells per axis for `convergence` mesh studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { bbox: [[0.0, 0.0], [1.0, 1.0]], nx: 20, ny: 20, sizes: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementRule {
    #[default]
    Pow2,
    Iso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub order: usize,
    pub refinement: RefinementRule,
    /// Orders for `convergence` order studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig { order: 2, refinement: RefinementRule::Pow2, orders: None }
    }
}

/// A scalar or a list of scalars (a sweep).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NitscheScaleConfig {
    #[default]
    Coarse,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NitscheConfig {
    pub gamma: OneOrMany,
    pub scale: NitscheScaleConfig,
}

impl Default for NitscheConfig {
    fn default() -> Self {
        NitscheConfig { gamma: OneOrMany::One(1e-2), scale: NitscheScaleConfig::Coarse }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhostConfig {
    pub gamma: f64,
}

impl Default for GhostConfig {
    fn default() -> Self {
        GhostConfig { gamma: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKindConfig {
    L1,
    #[default]
    L2,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestSpaceConfig {
    /// Standard active space, ghost-penalised Gram.
    #[default]
    Std,
    /// Aggregated space.
    Ag,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(default)]
    pub kind: LossKindConfig,
    #[serde(default)]
    pub test_space: TestSpaceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKindConfig {
    #[default]
    Poisson,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionConfig {
    #[default]
    Smooth2d,
    Sharp2d,
    Nonlinear2d,
    Invstate2d,
}

/// Named coefficient fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaField {
    /// `1 + 9 exp(-5((x - 0.5)² + (2y - 1)²))`.
    Bump2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaConfig {
    Constant(f64),
    Field(SigmaField),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKindConfig,
    pub solution: SolutionConfig,
    pub beta: [f64; 2],
    pub sigma: SigmaConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            kind: ProblemKindConfig::Poisson,
            solution: SolutionConfig::Smooth2d,
            beta: [2.0, 3.0],
            sigma: SigmaConfig::Constant(4.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationConfig {
    #[default]
    Tanh,
    Softplus,
}

/// Box mapped affinely onto `[-1, 1]²` before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputBoxConfig {
    /// Bounding box of the discrete domain.
    #[default]
    Domain,
    /// The background mesh box.
    Mesh,
    /// Raw coordinates.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    pub arch: Vec<usize>,
    pub activation: ActivationConfig,
    pub seed: u64,
    /// Rectify the output as `|x| + 0.01`.
    pub rect: bool,
    pub input_box: InputBoxConfig,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            arch: vec![2, 20, 20, 20, 1],
            activation: ActivationConfig::Tanh,
            seed: 1,
            rect: false,
            input_box: InputBoxConfig::Domain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodConfig {
    #[default]
    Lbfgs,
    Bfgs,
    /// Dense BFGS up to 1000 parameters, L-BFGS above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearchConfig {
    #[default]
    StrongWolfe,
    WeakWolfe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: MethodConfig,
    pub memory: usize,
    pub iters: usize,
    pub tol: f64,
    pub line_search: LineSearchConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: MethodConfig::Lbfgs,
            memory: 20,
            iters: 1000,
            tol: 1e-9,
            line_search: LineSearchConfig::StrongWolfe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionConfig {
    /// Every trial node inside the domain.
    All,
    Disk {
        #[serde(default = "center")]
        center: [f64; 2],
        radius: f64,
    },
    Box {
        lo: [f64; 2],
        hi: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    /// Observations are taken at the trial nodes inside this region.
    pub region: RegionConfig,
    /// Standard deviation of additive Gaussian noise on the data.
    pub noise: f64,
    pub step1: usize,
    pub step2: usize,
    /// `[[iterations, alpha], ...]`, alpha strictly increasing.
    pub step3: Vec<(usize, f64)>,
    pub sigma_arch: Vec<usize>,
    pub sigma_activation: ActivationConfig,
    /// Defaults to `nn.seed + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_seed: Option<u64>,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig {
            region: RegionConfig::Disk { center: center(), radius: 0.2 },
            noise: 0.0,
            step1: 400,
            step2: 100,
            step3: vec![(500, 0.01), (500, 0.03), (500, 0.09)],
            sigma_arch: vec![2, 20, 20, 1],
            sigma_activation: ActivationConfig::Softplus,
            sigma_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Disk centres `(x, x)` for `moving-domain`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<f64>>,
    /// `[start, stop, step]`, an alternative to `centers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_range: Option<[f64; 3]>,
    /// When false, studies report interpolation baselines only.
    pub train: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { centers: None, center_range: None, train: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Error checkpoints every this many iterations (0 disables them).
    pub checkpoint_stride: usize,
    /// Also checkpoint the errors of the network itself.
    pub network_errors: bool,
    /// Record wall-clock seconds. Off by default so reruns are bitwise
    /// identical.
    pub wall_clock: bool,
    /// Points per axis of the sampling grid for field dumps.
    pub grid: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            checkpoint_stride: 25,
            network_errors: false,
            wall_clock: false,
            grid: 101,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    /// Checks the constraints serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported config version {} (expected {SCHEMA_VERSION})", self.version));
        }
        match &self.geometry {
            GeometryConfig::Disk { radius, .. } if !(*radius > 0.0) => {
                return bad(format!("geometry.radius must be positive, got {radius}"));
            }
            GeometryConfig::Halfplane { normal, .. } if normal[0] == 0.0 && normal[1] == 0.0 => {
                return bad("geometry.normal must be non-zero".into());
            }
            _ => {}
        }
        let [lo, hi] = self.mesh.bbox;
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return bad(format!("mesh.box must have hi > lo, got {lo:?} .. {hi:?}"));
        }
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return bad("mesh.nx and mesh.ny must be positive".into());
        }
        if let Some(s) = &self.mesh.sizes {
            if s.is_empty() || s.contains(&0) {
                return bad("mesh.sizes must be a non-empty list of positive sizes".into());
            }
        }
        let orders = self.trial.orders.clone().unwrap_or_default();
        if std::iter::once(self.trial.order).chain(orders).any(|k| !(1..=6).contains(&k)) {
            return bad("trial orders must lie in 1..=6".into());
        }
        if self.nitsche.gamma.values().iter().any(|g| !(*g > 0.0)) || self.nitsche.gamma.values().is_empty() {
            return bad("nitsche.gamma must be positive".into());
        }
        if !(self.ghost.gamma >= 0.0) {
            return bad("ghost.gamma must be non-negative".into());
        }
        let arch_ok = |a: &[usize]| a.len() >= 2 && a[0] == 2 && a[a.len() - 1] == 1 && !a.contains(&0);
        if !arch_ok(&self.nn.arch) {
            return bad(format!("nn.arch must start with 2 inputs and end with 1 output, got {:?}", self.nn.arch));
        }
        if self.optimizer.memory == 0 {
            return bad("optimizer.memory must be positive".into());
        }
        if !(self.optimizer.tol >= 0.0) {
            return bad("optimizer.tol must be non-negative".into());
        }
        if let Some(inv) = &self.inverse {
            if !arch_ok(&inv.sigma_arch) {
                return bad(format!("inverse.sigma_arch must map 2 inputs to 1 output, got {:?}", inv.sigma_arch));
            }
            if !(inv.noise >= 0.0) {
                return bad("inverse.noise must be non-negative".into());
            }
            if let RegionConfig::Disk { radius, .. } = inv.region {
                if !(radius > 0.0) {
                    return bad("inverse.region.radius must be positive".into());
                }
            }
        }
        if let Some([start, stop, step]) = self.study.center_range {
            if !(step > 0.0) || stop < start {
                return bad("study.center_range must be [start, stop, step] with step > 0 and stop >= start".into());
            }
        }
        if self.output.grid < 2 {
            return bad("output.grid must be at least 2".into());
        }
        Ok(())
    }

    /// Disk centres of a moving-domain study.
    pub fn centers(&self) -> Result<Vec<f64>, CliError> {
        if let Some(c) = &self.study.centers {
            if c.is_empty() {
                return Err(CliError::Config("study.centers is empty".into()));
            }
            return Ok(c.clone());
        }
        match self.study.center_range {
            Some([start, stop, step]) => {
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + step * i as f64).collect())
            }
            None => Err(CliError::Config("moving-domain needs study.centers or study.center_range".into())),
        }
    }
}
