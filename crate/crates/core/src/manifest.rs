//! Run configuration files and run manifests.
//!
//! Both are TOML with `[scenario]` and `[planner]` tables named after the
//! config structs. A config file may leave any field out; a manifest holds
//! every resolved constant plus the seeds and output paths, and is written
//! before any trial starts so the run can be replayed exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{run_trial_traced, scenario_at_gap, AblationSpec, TrialResult};
use crate::planner::PlannerConfig;
use crate::trace::TraceEvent;
use crate::world::ScenarioConfig;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Partial configuration as read from a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.planner.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    /// Subcommand that produced the run.
    pub command: String,
    pub seeds: Vec<u64>,
    pub depths: Vec<usize>,
    pub gaps: Vec<f64>,
    pub seed_batches: usize,
    /// Replans timed per phase by a benchmark; 0 otherwise.
    pub replans: usize,
    /// Files the run writes, relative to the output directory.
    pub outputs: Vec<String>,
    /// Simulation steps between rendered frames; 0 when nothing is rendered.
    #[serde(default)]
    pub frame_stride: usize,
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
}

impl RunManifest {
    /// A single-trial manifest at the config's own depth and gap.
    pub fn single(command: &str, config: &RunConfig, seeds: Vec<u64>) -> Self {
        Self {
            version: CODE_VERSION.to_string(),
            command: command.to_string(),
            seeds,
            depths: vec![config.planner.depth],
            gaps: vec![config.scenario.mean_gap],
            seed_batches: 1,
            replans: 0,
            outputs: Vec::new(),
            frame_stride: 0,
            scenario: config.scenario.clone(),
            planner: config.planner,
        }
    }

    /// Manifest of a depth by gap grid.
    pub fn ablation(spec: &AblationSpec) -> Self {
        Self {
            version: CODE_VERSION.to_string(),
            command: "ablation".to_string(),
            seeds: spec.seeds(),
            depths: spec.depths.clone(),
            gaps: spec.gaps.clone(),
            seed_batches: spec.seed_batches,
            replans: 0,
            outputs: Vec::new(),
            frame_stride: 0,
            scenario: spec.scenario.clone(),
            planner: spec.planner,
        }
    }

    pub fn ablation_spec(&self) -> AblationSpec {
        AblationSpec {
            scenario: self.scenario.clone(),
            planner: self.planner,
            depths: self.depths.clone(),
            gaps: self.gaps.clone(),
            trials: self.seeds.len(),
            seed_batches: self.seed_batches,
            seed_list: self.seeds.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.scenario.validate()?;
        m.planner.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Configs of the trial at one grid point.
    pub fn trial_configs(&self, depth: usize, mean_gap: f64) -> (ScenarioConfig, PlannerConfig) {
        (
            scenario_at_gap(&self.scenario, mean_gap),
            PlannerConfig {
                depth,
                ..self.planner
            },
        )
    }

    /// Re-runs one trial of the manifest.
    pub fn replay(&self, depth: usize, mean_gap: f64, seed: u64) -> Result<(TrialResult, Vec<TraceEvent>)> {
        let (scenario, planner) = self.trial_configs(depth, mean_gap);
        run_trial_traced(&scenario, &planner, seed)
    }
}
