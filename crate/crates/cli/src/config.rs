use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use jetdesign::controller::ControllerGains;
use jetdesign::dynamics::{load_model, RobotModel};
use jetdesign::geometry::{GeometryConfig, GeometryParams};
use jetdesign::optimizer::OptimizerConfig;
use jetdesign::simulation::{SimulationConfig, Trajectory, VALIDATION_TRAJECTORIES};
use jetdesign::structural::StructuralConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A labelled design, written as `{"name": "Original", "angle": 15, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDesign {
    pub name: String,
    #[serde(flatten)]
    pub params: GeometryParams,
}

impl NamedDesign {
    pub fn new(name: impl Into<String>, params: GeometryParams) -> Self {
        Self { name: name.into(), params }
    }
}

/// The flown reference and the four optimized designs selected for validation.
pub fn table2_designs() -> Vec<NamedDesign> {
    vec![
        NamedDesign::new("Original", GeometryParams::BASELINE),
        NamedDesign::new("Optim1", GeometryParams::new(1, 47, 88, 50)),
        NamedDesign::new("Optim2", GeometryParams::new(2, 40, 94, 50)),
        NamedDesign::new("Optim3", GeometryParams::new(1, 48, 100, 130)),
        NamedDesign::new("Optim4", GeometryParams::new(8, 96, 100, 146)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// URDF with jet interfaces; the built-in model when absent. Relative
    /// paths are taken from the config file's directory.
    pub model: Option<PathBuf>,
    /// Trajectory flown during optimization and by `simulate`.
    pub trajectory: String,
    pub validation_trajectories: Vec<String>,
    pub designs: Vec<NamedDesign>,
    pub optimizer: OptimizerConfig,
    pub gains: ControllerGains,
    pub geometry: GeometryConfig,
    pub structural: StructuralConfig,
    pub simulation: SimulationConfig,
    pub output_dir: PathBuf,
    /// Overrides `optimizer.seed` when set.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            trajectory: "envelope".into(),
            validation_trajectories: VALIDATION_TRAJECTORIES.iter().map(|s| s.to_string()).collect(),
            designs: table2_designs(),
            optimizer: OptimizerConfig::default(),
            gains: ControllerGains::default(),
            geometry: GeometryConfig::default(),
            structural: StructuralConfig::default(),
            simulation: SimulationConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config and checks every referenced path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(m) = &cfg.model {
            if m.is_relative() {
                cfg.model = Some(base.join(m));
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if let Some(m) = &self.model {
            if !m.is_file() {
                bail!("model file not found: {}", m.display());
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.optimizer.seed)
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig { seed: self.seed(), ..self.optimizer.clone() }
    }

    pub fn robot(&self) -> Result<RobotModel> {
        match &self.model {
            Some(p) => load_model(p).with_context(|| format!("cannot load model {}", p.display())),
            None => Ok(RobotModel::default_model()),
        }
    }

    pub fn flight_trajectory(&self) -> Result<Trajectory> {
        Ok(Trajectory::named(&self.trajectory)?)
    }

    /// Digest of the settings that determine results (output location excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.seed = Some(self.seed());
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
