//! TOML config loading. One file can carry all three tables; commands pick
//! the ones they need and error when a required table is missing.

use std::path::Path;

use lleval_core::{PreprocessConfig, ScenarioSpec, SyntheticAgentParams};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub preprocess: Option<PreprocessConfig>,
    pub scenario: Option<ScenarioSpec>,
    pub agent: Option<SyntheticAgentParams>,
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

impl ConfigFile {
    pub fn scenario_or_err(&self) -> Result<&ScenarioSpec, Failure> {
        self.scenario.as_ref().ok_or_else(|| {
            Failure::input("a config file with a [scenario] table is required (pass --config)")
        })
    }

    pub fn agent_or_err(&self) -> Result<&SyntheticAgentParams, Failure> {
        self.agent.as_ref().ok_or_else(|| {
            Failure::input("a config file with an [agent] table is required (pass --config)")
        })
    }
}
