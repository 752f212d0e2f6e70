//! Service configuration: one TOML file plus `MEALREC_*` environment
//! overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use mealrec_core::{BanditConfig, LoadMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Recipe file; the bundled fixture when absent.
    pub dataset: Option<PathBuf>,
    pub load_mode: LoadMode,
    /// Directory holding one JSON document per profile and per model.
    pub store_dir: PathBuf,
    /// Episodes used when a bandit plan is requested for a user without a
    /// persisted model.
    pub bandit_episodes: u32,
    pub bandit: BanditConfig,
    /// Send permissive CORS headers so a browser client on another origin
    /// can call the API.
    pub cors: bool,
    /// Directory of static files (a built web client) served for paths no
    /// API route claims.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            dataset: None,
            load_mode: LoadMode::Full,
            store_dir: PathBuf::from("mealrec-store"),
            bandit_episodes: 200,
            bandit: BanditConfig::default(),
            cors: true,
            static_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {var}: {value:?}")]
    Env { var: &'static str, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn set<T: FromStr>(
    var: &'static str,
    lookup: &impl Fn(&str) -> Option<String>,
    slot: &mut T,
) -> Result<(), ConfigError> {
    if let Some(value) = lookup(var) {
        *slot = value.parse().map_err(|_| ConfigError::Env { var, value })?;
    }
    Ok(())
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Read `path` (defaults when `None`), then apply process environment
    /// overrides and validate.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        set("MEALREC_HOST", &lookup, &mut self.host)?;
        set("MEALREC_PORT", &lookup, &mut self.port)?;
        if let Some(p) = lookup("MEALREC_DATASET") {
            self.dataset = (!p.is_empty()).then(|| PathBuf::from(p));
        }
        set("MEALREC_STORE_DIR", &lookup, &mut self.store_dir)?;
        set("MEALREC_CORS", &lookup, &mut self.cors)?;
        if let Some(p) = lookup("MEALREC_STATIC_DIR") {
            self.static_dir = (!p.is_empty()).then(|| PathBuf::from(p));
        }
        set("MEALREC_BANDIT_EPISODES", &lookup, &mut self.bandit_episodes)?;
        let b = &mut self.bandit;
        set("MEALREC_EPSILON0", &lookup, &mut b.epsilon0)?;
        set("MEALREC_EPSILON_DECAY", &lookup, &mut b.epsilon_decay)?;
        set("MEALREC_EPSILON_MIN", &lookup, &mut b.epsilon_min)?;
        set("MEALREC_LEARNING_RATE", &lookup, &mut b.learning_rate)?;
        set("MEALREC_MAX_STUMPS", &lookup, &mut b.max_stumps)?;
        set("MEALREC_STUMPS_PER_ROUND", &lookup, &mut b.stumps_per_round)?;
        set("MEALREC_BUFFER_CAPACITY", &lookup, &mut b.buffer_capacity)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bandit_episodes == 0 {
            return Err(ConfigError::Invalid("bandit_episodes must be positive".into()));
        }
        self.bandit
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
