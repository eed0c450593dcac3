use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};

/// Protocol settings shared by every seed of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Environment steps per seed.
    pub steps: u64,
    /// Evaluate every this many environment steps (and at the last step).
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_epsilon: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Method name written to CSVs; defaults to the loss variant.
    pub label: Option<String>,
    /// Worker threads for multi-run commands; defaults to the CPU count.
    pub workers: Option<usize>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            steps: 200_000,
            eval_every: 1_000,
            eval_episodes: 10,
            eval_epsilon: 0.01,
            seeds: vec![0],
            out: PathBuf::from("results"),
            label: None,
            workers: None,
        }
    }
}

/// A complete experiment description, loadable from a TOML file with
/// `[env]`, `[agent]` (plus `[agent.epsilon]`, `[agent.bonus_clip]`) and
/// `[run]` sections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub agent: AgentConfig,
    pub run: RunSettings,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |span| text[..span.start].matches('\n').count() + 1);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative map paths are resolved against the config file.
        if let (Some(map), Some(dir)) = (config.env.map.as_mut(), path.parent()) {
            if map.is_relative() {
                *map = dir.join(&*map);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        let run = &self.run;
        if run.steps == 0 || run.eval_every == 0 || run.eval_episodes == 0 {
            return Err(Error::Config("steps, eval_every and eval_episodes must be positive".into()));
        }
        if run.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if run.seeds.iter().collect::<HashSet<_>>().len() != run.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if !(0.0..=1.0).contains(&run.eval_epsilon) {
            return Err(Error::Config("eval_epsilon must lie in [0, 1]".into()));
        }
        if run.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn method(&self) -> String {
        self.run.label.clone().unwrap_or_else(|| self.agent.loss_variant.name().to_string())
    }

    pub fn env_name(&self) -> &str {
        &self.env.name
    }

    pub fn workers(&self) -> usize {
        self.run
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
