use std::fmt;
use std::path::{Path, PathBuf};

use halludetect_core::MahalanobisConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::{AugmentArgs, EvalArgs, FitArgs, ScoreArgs, SweepArgs, SynthArgs, TransferArgs};

/// Process exit status for each failure class.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input data. Exit 2.
    Config(String),
    /// The chat endpoint could not be reached or kept failing. Exit 3.
    Transport(String),
    /// Writing an output failed. Exit 1.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Config(_) => 2,
            CliError::Transport(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Transport(m) | CliError::Output(m) => f.write_str(m),
        }
    }
}

impl From<halludetect_core::Error> for CliError {
    fn from(e: halludetect_core::Error) -> Self {
        if e.is_transport() {
            CliError::Transport(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// The config file: a top-level `seed` plus one table per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub augment: AugmentArgs,
    #[serde(default)]
    pub fit: FitArgs,
    #[serde(default)]
    pub score: ScoreArgs,
    #[serde(default)]
    pub eval: EvalArgs,
    #[serde(default)]
    pub sweep: SweepArgs,
    #[serde(default)]
    pub transfer: TransferArgs,
    #[serde(default)]
    pub synth: SynthArgs,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))
    }
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| config_err(format!("missing required option --{flag}")))
}

/// Fails before any work starts if an input path does not exist.
pub fn existing(path: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let path = require(path, flag)?;
    if !path.is_file() {
        return Err(config_err(format!(
            "--{flag}: file not found: {}",
            path.display()
        )));
    }
    Ok(path)
}

pub fn model_config(
    k: Option<usize>,
    epsilon_rel: Option<f64>,
    residual_mode: Option<halludetect_core::ResidualMode>,
) -> CliResult<MahalanobisConfig> {
    let d = MahalanobisConfig::default();
    let cfg = MahalanobisConfig {
        k: k.unwrap_or(d.k),
        epsilon_rel: epsilon_rel.unwrap_or(d.epsilon_rel),
        residual_mode: residual_mode.unwrap_or(d.residual_mode),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Provenance attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    /// SHA-256 of the resolved options, flags and config file merged.
    pub config_hash: String,
}

impl RunMeta {
    pub fn new<T: Serialize>(command: &'static str, seed: u64, resolved: &T) -> Self {
        let canonical = serde_json::json!({
            "command": command,
            "seed": seed,
            "options": resolved,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        Self {
            tool: "halludetect",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_hash: format!("{digest:x}"),
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("metadata serializes")
    }
}
