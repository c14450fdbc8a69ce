//! The JSON config file shared by every subcommand. All sections are
//! optional; command-line flags override file values, and `PYIME_BIND` /
//! `PYIME_LOG` override the service's bind address and log filter.

use std::path::{Path, PathBuf};

use pyime_core::training::TrainConfig;

use crate::build::BuildSpec;
use crate::error::Result;
use crate::io;
use crate::train::ModelSpec;

pub const ENV_BIND: &str = "PYIME_BIND";
pub const ENV_LOG: &str = "PYIME_LOG";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub model: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub bind: String,
    pub beam_size: usize,
    pub top_k: usize,
    /// Upper bound on a request's beam_size.
    pub max_beam_size: usize,
    pub log: String,
    /// Allowed CORS origins; `*` allows any.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            model: None,
            lexicon: None,
            bind: "127.0.0.1:8080".into(),
            beam_size: pyime_core::decoder::DEFAULT_BEAM_SIZE,
            top_k: pyime_core::decoder::DEFAULT_TOP_K,
            max_beam_size: 256,
            log: "info".into(),
            cors_origins: vec!["*".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lexicon: Option<PathBuf>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub service: ServiceConfig,
    pub dataset: Option<BuildSpec>,
}

impl Config {
    /// Reads `path` if given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg: Config = match path {
            Some(p) => io::read_json(p)?,
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(bind) = get(ENV_BIND) {
            self.service.bind = bind;
        }
        if let Some(log) = get(ENV_LOG) {
            self.service.log = log;
        }
    }
}
