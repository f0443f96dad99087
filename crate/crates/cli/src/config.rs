//! Pipeline configuration file (TOML) with one section per stage.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polarprior::{
    DisambiguationConfig, FitConfig, LossConfig, MaterialConfig, MosaicLayout, SceneSpec,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemosaicSection {
    #[serde(default)]
    pub layout: MosaicLayout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub disambiguation: DisambiguationConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub synth: SceneSpec,
    #[serde(default)]
    pub demosaic: DemosaicSection,
    #[serde(default)]
    pub paths: Paths,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Checks every section and copies the loss weights into the fit schedule.
    pub fn finalize(mut self) -> Result<Self> {
        self.disambiguation.validate()?;
        self.loss.validate()?;
        self.fit.loss = self.loss;
        self.fit.validate()?;
        Ok(self)
    }
}
