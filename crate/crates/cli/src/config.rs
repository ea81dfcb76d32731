use std::path::{Path, PathBuf};

use njcr_core::pipeline::PipelineParams;
use njcr_core::synthetic::SceneParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A complete `run` description. Every stage parameter lives in `params`,
/// flattened so the JSON document reads as one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Input cube; when absent a synthetic scene is generated from
    /// `synthetic`.
    pub cube: Option<PathBuf>,
    /// Ground truth for evaluation.
    pub mask: Option<PathBuf>,
    pub synthetic: Option<SceneParams>,
    pub output_dir: PathBuf,
    /// Treat a solver that hits `max_iter` as an error.
    pub fail_on_nonconvergence: bool,
    #[serde(flatten)]
    pub params: PipelineParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cube: None,
            mask: None,
            synthetic: None,
            output_dir: PathBuf::from("njcr-out"),
            fail_on_nonconvergence: false,
            params: PipelineParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks the inputs and every stage parameter before anything runs.
    pub fn validate(&self) -> CliResult<()> {
        match (&self.cube, &self.synthetic) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either `cube` or `synthetic`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "no input: set `cube` or `synthetic`".into(),
                ))
            }
            _ => {}
        }
        for path in self.cube.iter().chain(&self.mask) {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "input {} does not exist",
                    path.display()
                )));
            }
        }
        let p = &self.params;
        p.solver
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if p.segmentation.target_count < 2 {
            return Err(CliError::Config("superpixel count must be at least 2".into()));
        }
        if p.dictionary.m_per_superpixel == 0 {
            return Err(CliError::Config("m_per_superpixel must be at least 1".into()));
        }
        if !(p.dictionary.cutoff_quantile > 0.0 && p.dictionary.cutoff_quantile <= 1.0) {
            return Err(CliError::Config("cutoff_quantile must be in (0, 1]".into()));
        }
        if !(p.rx_ridge >= 0.0) {
            return Err(CliError::Config("rx_ridge must be non-negative".into()));
        }
        Ok(())
    }
}
