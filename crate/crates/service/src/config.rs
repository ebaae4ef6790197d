//! `serve` configuration file.
//!
//! ```toml
//! [server]
//! host = "127.0.0.1"
//! port = 8080              # 0 picks a free port
//! storage_dir = "./sessions"
//! locale = "en"
//! auth_token_env = "THREADWISE_TOKEN"   # optional
//!
//! [llm]
//! provider = "mock"
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use threadwise_core::llm::gateway::ProviderConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config field {field}: {message}")]
    Field { field: String, message: String },
}

fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_port() -> u16 {
    8080
}
fn default_storage() -> PathBuf {
    PathBuf::from("sessions")
}
fn default_locale() -> String {
    "en".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_storage")]
    pub storage_dir: PathBuf,
    #[serde(default = "default_locale")]
    pub locale: String,
    /// Environment variable holding the bearer token. Unset or empty
    /// variable means no token is required.
    #[serde(default)]
    pub auth_token_env: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: default_host(),
            port: default_port(),
            storage_dir: default_storage(),
            locale: default_locale(),
            auth_token_env: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub server: ServerConfig,
    pub llm: ProviderConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.llm.check().map_err(|e| {
            let message = e.to_string();
            let field = message
                .split_whitespace()
                .find(|w| w.starts_with("llm."))
                .unwrap_or("llm")
                .to_owned();
            ConfigError::Field { field, message }
        })?;
        if cfg.server.locale.trim().is_empty() {
            return Err(ConfigError::Field {
                field: "server.locale".into(),
                message: "must not be empty".into(),
            });
        }
        Ok(cfg)
    }

    /// Reads `path`; a relative `storage_dir` resolves against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if cfg.server.storage_dir.is_relative() {
            if let Some(base) = path.parent() {
                cfg.server.storage_dir = base.join(&cfg.server.storage_dir);
            }
        }
        Ok(cfg)
    }

    /// The token from `auth_token_env`, if that variable is set and non-empty.
    pub fn auth_token(&self) -> Option<String> {
        let var = self.server.auth_token_env.as_deref()?;
        std::env::var(var).ok().filter(|t| !t.is_empty())
    }

    /// Creates the storage directory when missing; its parent must exist.
    pub fn prepare_storage(&self) -> Result<PathBuf, ConfigError> {
        let dir = &self.server.storage_dir;
        if dir.is_dir() {
            return Ok(dir.clone());
        }
        let parent_ok = dir
            .parent()
            .map(|p| p.as_os_str().is_empty() || p.is_dir())
            .unwrap_or(false);
        if !parent_ok {
            return Err(ConfigError::Field {
                field: "server.storage_dir".into(),
                message: format!("{} does not exist and neither does its parent", dir.display()),
            });
        }
        std::fs::create_dir(dir).map_err(|e| ConfigError::Field {
            field: "server.storage_dir".into(),
            message: format!("cannot create {}: {e}", dir.display()),
        })?;
        Ok(dir.clone())
    }
}
