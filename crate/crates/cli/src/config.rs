use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use graspkit::graspgen::{GripperModel, LabelConfig};
use graspkit::octree::{DEFAULT_DEPTH, MAX_DEPTH};
use graspkit::refine::RefinementConfig;

/// Settings shared by the subcommands. Flags override a `--config` file,
/// which overrides these defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub depth: u8,
    pub rho: f64,
    pub contact_density: f64,
    pub gripper: Option<PathBuf>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub nms_t: f64,
    /// Degrees.
    pub nms_r: f64,
    pub top_k: usize,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = RefinementConfig::default();
        let l = LabelConfig::default();
        Self {
            seed: 0,
            depth: DEFAULT_DEPTH,
            rho: l.rho,
            contact_density: l.contact_density,
            gripper: None,
            gamma_min: r.gamma_min,
            gamma_max: r.gamma_max,
            nms_t: r.nms_translation,
            nms_r: r.nms_rotation.to_degrees(),
            top_k: r.top_k,
            threads: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(p) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            bail!("depth {} outside 1..={MAX_DEPTH}", self.depth);
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            bail!("rho must be positive, got {}", self.rho);
        }
        if !(self.contact_density > 0.0 && self.contact_density.is_finite()) {
            bail!("contact density must be positive, got {}", self.contact_density);
        }
        if self.threads == Some(0) {
            bail!("thread count must be at least 1");
        }
        self.refinement().validate()?;
        Ok(())
    }

    pub fn refinement(&self) -> RefinementConfig {
        RefinementConfig {
            gamma_min: self.gamma_min,
            gamma_max: self.gamma_max,
            nms_translation: self.nms_t,
            nms_rotation: self.nms_r.to_radians(),
            top_k: self.top_k,
        }
    }

    pub fn labels(&self) -> LabelConfig {
        LabelConfig {
            rho: self.rho,
            contact_density: self.contact_density,
            ..LabelConfig::default()
        }
    }

    pub fn gripper(&self) -> Result<GripperModel> {
        match &self.gripper {
            Some(p) => Ok(GripperModel::from_json_file(p)?),
            None => Ok(GripperModel::default()),
        }
    }
}
