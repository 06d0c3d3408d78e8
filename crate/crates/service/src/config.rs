use std::path::{Path, PathBuf};

use floodlense_core::segmentation::EngineKind;
use floodlense_core::GeoPoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Parse(PathBuf, String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    #[default]
    Fixture,
    Live,
}

/// Service settings. Loaded from JSON with these field names; every field
/// is optional in the file. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub image_dir: PathBuf,
    /// Public prefix for stored images; defaults to this host's `/images`.
    pub base_url: Option<String>,
    pub gazetteer_path: PathBuf,
    pub half_extent_deg: f64,
    pub default_point: GeoPoint,
    pub default_threshold: f32,
    pub backend_mode: BackendMode,
    pub engine: EngineKind,
    pub weight_path: Option<PathBuf>,
    pub image_size: usize,
    /// Fixture scene store root.
    pub tile_store: PathBuf,
    pub sentinel_url: String,
    /// Sentinel Hub OGC instance id (env FLOODLENSE_SH_KEY).
    pub sentinel_instance_id: Option<String>,
    pub nominatim_url: String,
    pub llm_url: String,
    pub llm_model: String,
    /// Chat-completion API key (env FLOODLENSE_LLM_KEY).
    pub llm_api_key: Option<String>,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            image_dir: "images".into(),
            base_url: None,
            gazetteer_path: "gazetteer.jsonl".into(),
            half_extent_deg: 0.05,
            default_point: GeoPoint::new(13.0827, 80.2707).expect("valid"),
            default_threshold: 0.5,
            backend_mode: BackendMode::Fixture,
            engine: EngineKind::Unet,
            weight_path: None,
            image_size: 256,
            tile_store: "tiles".into(),
            sentinel_url: "https://services.sentinel-hub.com".into(),
            sentinel_instance_id: None,
            nominatim_url: "https://nominatim.openstreetmap.org".into(),
            llm_url: "https://api.openai.com/v1".into(),
            llm_model: "gpt-3.5-turbo".into(),
            llm_api_key: None,
            cors_origin: None,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ServiceConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServiceConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(base_dir.to_owned(), e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_owned(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).map_err(|e| match e {
            ConfigError::Parse(_, msg) => ConfigError::Parse(path.to_owned(), msg),
            other => other,
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.image_dir);
        resolve(base, &mut self.gazetteer_path);
        resolve(base, &mut self.tile_store);
        if let Some(w) = self.weight_path.as_mut() {
            resolve(base, w);
        }
    }

    /// Apply FLOODLENSE_PORT, FLOODLENSE_SH_KEY and FLOODLENSE_LLM_KEY.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(port) = var("FLOODLENSE_PORT") {
            self.port = port
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("FLOODLENSE_PORT={port:?} is not a port")))?;
        }
        if let Some(key) = var("FLOODLENSE_SH_KEY") {
            self.sentinel_instance_id = Some(key);
        }
        if let Some(key) = var("FLOODLENSE_LLM_KEY") {
            self.llm_api_key = Some(key);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.port == 0 {
            return bad("port must be in 1..=65535".into());
        }
        if !(self.half_extent_deg > 0.0 && self.half_extent_deg.is_finite()) {
            return bad(format!("half_extent_deg {} must be > 0", self.half_extent_deg));
        }
        if !(self.default_threshold > 0.0 && self.default_threshold < 1.0) {
            return bad(format!("default_threshold {} outside (0, 1)", self.default_threshold));
        }
        if self.image_size == 0 {
            return bad("image_size must be >= 1".into());
        }
        if self.engine == EngineKind::Unet && self.weight_path.is_none() {
            return bad("engine \"unet\" needs weight_path".into());
        }
        if self.backend_mode == BackendMode::Live {
            if self.sentinel_instance_id.is_none() {
                return bad("live mode needs a Sentinel Hub instance id (FLOODLENSE_SH_KEY)".into());
            }
            if self.llm_api_key.is_none() {
                return bad("live mode needs an LLM API key (FLOODLENSE_LLM_KEY)".into());
            }
        }
        Ok(())
    }

    pub fn base_url(&self) -> String {
        self.base_url
            .clone()
            .unwrap_or_else(|| format!("http://127.0.0.1:{}/images", self.port))
    }
}
