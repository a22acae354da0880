//! Run configuration (TOML).
//!
//! ```toml
//! seed = 42
//! cache_dir = "cache"
//! output_dir = "runs"
//! max_in_flight = 4
//! tasks = ["tasks/tail.jsonl", "fixtures/tasks/contextual.jsonl"]
//!
//! [snapshot]
//! kg = "fixtures/kg.nt"
//! ontology = "fixtures/ontology.nt"
//!
//! [trials]
//! relation = 10   # tail, relation and relation-extraction queries
//! path = 5        # contextual path generation
//!
//! [[models]]
//! name = "gpt-4"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4"
//! strategies = ["single-step", "single-step-autocot"]
//! ```
//!
//! A model takes either `endpoint` (HTTP, bearer token from `KGR_API_KEY`)
//! or `script` (a JSON Lines file of canned answers). Relative paths are
//! resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kgreason::prompting::Strategy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    pub snapshot: SnapshotConfig,
    #[serde(default)]
    pub tasks: Vec<PathBuf>,
    #[serde(default)]
    pub trials: TrialConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    /// Directory of edited prompt templates; the built-in set by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    pub kg: PathBuf,
    pub ontology: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    #[serde(default = "default_relation_trials")]
    pub relation: u32,
    #[serde(default = "default_path_trials")]
    pub path: u32,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            relation: default_relation_trials(),
            path: default_path_trials(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    /// Model id sent in the request body; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_max_in_flight() -> usize {
    4
}
fn default_relation_trials() -> u32 {
    10
}
fn default_path_trials() -> u32 {
    5
}
fn default_max_tokens() -> u32 {
    512
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_max_attempts() -> u32 {
    5
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl RunConfig {
    /// Parses the file without touching relative paths.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn resolve_paths(mut self, base: &Path) -> Self {
        let config = &mut self;
        resolve(base, &mut config.cache_dir);
        resolve(base, &mut config.output_dir);
        resolve(base, &mut config.snapshot.kg);
        resolve(base, &mut config.snapshot.ontology);
        for task in &mut config.tasks {
            resolve(base, task);
        }
        if let Some(prompts) = &mut config.prompts {
            resolve(base, prompts);
        }
        for model in &mut config.models {
            if let Some(script) = &mut model.script {
                resolve(base, script);
            }
        }
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials.relation == 0 || self.trials.path == 0 {
            bail!("trials must be at least 1");
        }
        if self.max_in_flight == 0 {
            bail!("max_in_flight must be at least 1");
        }
        let mut names = std::collections::BTreeSet::new();
        for model in &self.models {
            if !names.insert(&model.name) {
                bail!("model name {:?} appears twice", model.name);
            }
            match (&model.endpoint, &model.script) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => bail!("model {:?} needs exactly one of endpoint or script", model.name),
            }
            if model.strategies.is_empty() {
                bail!("model {:?} has no strategies", model.name);
            }
            if model.max_attempts == 0 {
                bail!("model {:?}: max_attempts must be at least 1", model.name);
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration as written (relative paths unresolved,
    /// command-line overrides applied). Recorded in every run record.
    pub fn hash(&self) -> anyhow::Result<String> {
        Ok(kgreason::llm::sha256_hex(toml::to_string(self)?))
    }
}
