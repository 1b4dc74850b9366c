//! Settings from a TOML file, then `EMX_*` environment variables, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use emx_core::provider::ProviderConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where completions come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    #[default]
    Live,
    Replay,
    /// Live, and the completions are saved as replay fixtures.
    Record,
}

impl FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(ProviderMode::Live),
            "replay" => Ok(ProviderMode::Replay),
            "record" => Ok(ProviderMode::Record),
            other => Err(format!("unknown provider mode `{other}` (live, replay, record)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub provider: ProviderConfig,
    pub mode: ProviderMode,
    pub top_n: usize,
    pub tolerance: f64,
    pub k: usize,
    pub prompt_file: Option<PathBuf>,
    pub fixture_dir: Option<PathBuf>,
    pub port: u16,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            provider: ProviderConfig::default(),
            mode: ProviderMode::Live,
            top_n: 3,
            tolerance: 0.03,
            k: 5,
            prompt_file: None,
            fixture_dir: None,
            port: 7878,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("environment variable {var}: {message}")]
    Env { var: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<ProviderMode>,
    pub fixture_dir: Option<PathBuf>,
    pub prompt_file: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub iterations: Option<u32>,
    pub max_parallel: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub top_n: Option<usize>,
    pub tolerance: Option<f64>,
    pub k: Option<usize>,
    pub port: Option<u16>,
}

/// File read when `--config` is not given, if it exists.
pub const DEFAULT_CONFIG_FILE: &str = "emx.toml";

impl AppConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File { path: path.to_owned(), message: e.to_string() })?;
        toml::from_str(&text).map_err(|e| ConfigError::File { path: path.to_owned(), message: e.to_string() })
    }

    /// Apply `EMX_*` variables looked up through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(var: &str, v: String) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse().map_err(|e: T::Err| ConfigError::Env { var: var.into(), message: e.to_string() })
        }
        let p = &mut self.provider;
        if let Some(v) = get("EMX_PROVIDER") {
            self.mode = v.parse().map_err(|message| ConfigError::Env { var: "EMX_PROVIDER".into(), message })?;
        }
        if let Some(v) = get("EMX_ENDPOINT") {
            p.endpoint = v;
        }
        if let Some(v) = get("EMX_MODEL") {
            p.model_name = v;
        }
        if let Some(v) = get("EMX_API_KEY_ENV") {
            p.api_key_env = v;
        }
        if let Some(v) = get("EMX_TEMPERATURE") {
            p.temperature = parse("EMX_TEMPERATURE", v)?;
        }
        if let Some(v) = get("EMX_ITERATIONS") {
            p.iterations = parse("EMX_ITERATIONS", v)?;
        }
        if let Some(v) = get("EMX_MAX_PARALLEL") {
            p.max_parallel = parse("EMX_MAX_PARALLEL", v)?;
        }
        if let Some(v) = get("EMX_TIMEOUT_SECS") {
            p.timeout_secs = parse("EMX_TIMEOUT_SECS", v)?;
        }
        if let Some(v) = get("EMX_TOP_N") {
            self.top_n = parse("EMX_TOP_N", v)?;
        }
        if let Some(v) = get("EMX_TOLERANCE") {
            self.tolerance = parse("EMX_TOLERANCE", v)?;
        }
        if let Some(v) = get("EMX_K") {
            self.k = parse("EMX_K", v)?;
        }
        if let Some(v) = get("EMX_PROMPT_FILE") {
            self.prompt_file = Some(v.into());
        }
        if let Some(v) = get("EMX_FIXTURES") {
            self.fixture_dir = Some(v.into());
        }
        if let Some(v) = get("EMX_PORT") {
            self.port = parse("EMX_PORT", v)?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        let p = &mut self.provider;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.mode, o.mode);
        set!(p.endpoint, o.endpoint);
        set!(p.model_name, o.model);
        set!(p.temperature, o.temperature);
        set!(p.iterations, o.iterations);
        set!(p.max_parallel, o.max_parallel);
        set!(p.timeout_secs, o.timeout_secs);
        set!(self.top_n, o.top_n);
        set!(self.tolerance, o.tolerance);
        set!(self.k, o.k);
        set!(self.port, o.port);
        if o.prompt_file.is_some() {
            self.prompt_file = o.prompt_file.clone();
        }
        if o.fixture_dir.is_some() {
            self.fixture_dir = o.fixture_dir.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.provider.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.top_n == 0 {
            return Err(ConfigError::Invalid("top_n must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tolerance) {
            return Err(ConfigError::Invalid(format!("tolerance must be within [0, 1], got {}", self.tolerance)));
        }
        if self.mode != ProviderMode::Live && self.fixture_dir.is_none() {
            return Err(ConfigError::Invalid("replay and record modes need a fixture directory".into()));
        }
        Ok(())
    }

    /// File, then environment, then flags.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        overrides: &Overrides,
    ) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(path) => Self::from_file(path)?,
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => Self::from_file(Path::new(DEFAULT_CONFIG_FILE))?,
            None => Self::default(),
        };
        cfg.apply_env(env)?;
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}
