//! Application configuration: a JSON file plus `MIDSMITH_*` environment
//! overrides.
//!
//! Every field can be overridden. Top-level fields use `MIDSMITH_<FIELD>`,
//! nested ones join the path with a double underscore, e.g.
//! `MIDSMITH_ENGINE__TWO_STEP=true` or `MIDSMITH_VQA__BASE_URL=http://…`.
//! String fields take the variable verbatim; everything else is parsed as
//! JSON, so a whole section can be replaced with `MIDSMITH_ENGINE='{…}'`.

use std::fs;
use std::path::{Path, PathBuf};

use midsmith_backends::BackendConfig;
use midsmith_engine::EngineConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const ENV_PREFIX: &str = "MIDSMITH";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub listen_addr: String,
    pub engine: EngineConfig,
    /// Backend answering VQA questions for coherence scoring.
    pub vqa: BackendConfig,
    /// Teacher model for correction data and intent judging.
    pub teacher: BackendConfig,
    /// Relative dataset paths in eval requests resolve against this.
    pub dataset_dir: PathBuf,
    pub image_store_dir: PathBuf,
    pub report_dir: PathBuf,
    pub vocab_file: PathBuf,
    pub parallelism: usize,
    /// Live sessions kept before the least recently used is evicted.
    pub session_capacity: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            listen_addr: "127.0.0.1:8080".into(),
            engine: EngineConfig::default(),
            vqa: BackendConfig::mock(),
            teacher: BackendConfig::mock(),
            dataset_dir: "data".into(),
            image_store_dir: "data/images".into(),
            report_dir: "reports".into(),
            vocab_file: "data/vocab.json".into(),
            parallelism: 8,
            session_capacity: 1024,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("environment variable {var}: {reason}")]
    Env { var: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn env_name(path: &[&str]) -> String {
    let mut name = String::from(ENV_PREFIX);
    for (i, p) in path.iter().enumerate() {
        name.push_str(if i == 0 { "_" } else { "__" });
        name.push_str(&p.to_ascii_uppercase());
    }
    name
}

fn apply_env(value: &mut Value, path: &mut Vec<String>, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
    let Value::Object(map) = value else { return Ok(()) };
    for (key, field) in map.iter_mut() {
        path.push(key.clone());
        let var = env_name(&path.iter().map(String::as_str).collect::<Vec<_>>());
        if let Some(raw) = lookup(&var) {
            *field = match field {
                Value::String(_) => Value::String(raw),
                Value::Null => serde_json::from_str(&raw).unwrap_or(Value::String(raw)),
                _ => serde_json::from_str(&raw)
                    .map_err(|e| ConfigError::Env { var: var.clone(), reason: e.to_string() })?,
            };
        } else {
            apply_env(field, path, lookup)?;
        }
        path.pop();
    }
    Ok(())
}

impl AppConfig {
    /// Parse `json` (an empty string means all defaults), then apply
    /// overrides from `lookup`.
    pub fn from_json_with_env(json: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let base: AppConfig = if json.trim().is_empty() {
            AppConfig::default()
        } else {
            serde_json::from_str(json).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        let mut value = serde_json::to_value(&base).map_err(|e| ConfigError::Parse(e.to_string()))?;
        apply_env(&mut value, &mut Vec::new(), lookup)?;
        let config: AppConfig = serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Load `path` (or defaults when `None`) with process environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let json = match path {
            Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_owned(), source })?,
            None => String::new(),
        };
        Self::from_json_with_env(&json, &|k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if self.session_capacity == 0 {
            return Err(ConfigError::Invalid("session_capacity must be at least 1".into()));
        }
        self.engine.validate().map_err(ConfigError::Invalid)?;
        for (name, b) in [("vqa", &self.vqa), ("teacher", &self.teacher)] {
            b.validate().map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Create the image store and report directories.
    pub fn ensure_dirs(&self) -> Result<(), ConfigError> {
        for d in [&self.image_store_dir, &self.report_dir] {
            fs::create_dir_all(d).map_err(|source| ConfigError::Io { path: d.clone(), source })?;
        }
        Ok(())
    }

    pub fn resolve_dataset(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.dataset_dir.join(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let m: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| m.get(k).cloned()
    }

    #[test]
    fn defaults_and_overrides() {
        let c = AppConfig::from_json_with_env("", &env(&[])).unwrap();
        assert_eq!(c, AppConfig::default());

        let c = AppConfig::from_json_with_env(
            r#"{"parallelism": 2, "engine": {"image_width": 64}}"#,
            &env(&[
                ("MIDSMITH_LISTEN_ADDR", "0.0.0.0:9000"),
                ("MIDSMITH_PARALLELISM", "4"),
                ("MIDSMITH_ENGINE__TWO_STEP", "true"),
                ("MIDSMITH_VQA__BASE_URL", "http://vqa:1"),
                ("MIDSMITH_TEACHER__SCRIPT", "teacher.json"),
            ]),
        )
        .unwrap();
        assert_eq!(c.listen_addr, "0.0.0.0:9000");
        assert_eq!(c.parallelism, 4);
        assert!(c.engine.two_step);
        assert_eq!(c.engine.image_width, 64);
        assert_eq!(c.vqa.base_url.as_deref(), Some("http://vqa:1"));
        assert_eq!(c.teacher.script.as_deref(), Some(Path::new("teacher.json")));
    }

    #[test]
    fn bad_values_are_reported() {
        let e = AppConfig::from_json_with_env("", &env(&[("MIDSMITH_PARALLELISM", "many")])).unwrap_err();
        assert!(matches!(e, ConfigError::Env { ref var, .. } if var == "MIDSMITH_PARALLELISM"));
        assert!(matches!(
            AppConfig::from_json_with_env("", &env(&[("MIDSMITH_PARALLELISM", "0")])),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(AppConfig::from_json_with_env("{", &env(&[])), Err(ConfigError::Parse(_))));
    }
}
