//! Layered settings: command-line flags win over `SANDBOX_*` environment
//! variables (both handled by clap), which win over the settings file.

use std::path::{Path, PathBuf};

use sandbox_core::llm::LlmConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_STORE: &str = "store";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8787";
pub const DEFAULT_AGENT_LISTEN: &str = "127.0.0.1:7878";

/// Contents of the optional `--settings` JSON file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Agent endpoint for `session run`.
    pub agent: Option<String>,
    pub clock_scale: Option<f64>,
    /// Bind address for `agent run`.
    pub agent_listen: Option<String>,
    /// Bind address for `serve`.
    pub listen: Option<String>,
    pub store: Option<PathBuf>,
    pub llm: Option<LlmConfig>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read settings file {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("settings file {}: {e}", path.display())))
    }
}

/// First of flag/env value, settings value, built-in default.
pub fn pick<T>(flag_or_env: Option<T>, file: Option<T>, default: T) -> T {
    flag_or_env.or(file).unwrap_or(default)
}
