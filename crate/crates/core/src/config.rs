//! `key = value` settings files.
//!
//! ```text
//! # model
//! context_tokens = 4096
//! prompt_overhead_tokens = 64
//! backend.url = http://localhost:8000/v1/chat/completions
//! quality.support_threshold = 0.2
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so typos do not go unnoticed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::budget::ModelLimits;
use crate::pipeline::{PromptTemplate, Stage, Templates, DEFAULT_MAX_IN_FLIGHT};
use crate::quality::QualityConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendSettings {
    pub url: Option<String>,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            url: None,
            model: "llama-2-7b-chat".into(),
            api_key_env: None,
            timeout: Duration::from_millis(120_000),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSettings {
    pub port: u16,
    pub allow_raw: bool,
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            port: 8080,
            allow_raw: false,
            ui_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub limits: ModelLimits,
    pub backend: BackendSettings,
    pub quality: QualityConfig,
    pub lexicon_dir: Option<PathBuf>,
    pub service: ServiceSettings,
    pub templates: Templates,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::Line {
        line,
        reason: format!("{key}: {e}"),
    })
}

impl Settings {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (i, raw) in source.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Line {
                line,
                reason: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let template_err = |e: crate::pipeline::RenderError| ConfigError::Line {
                line,
                reason: e.to_string(),
            };
            match key {
                "context_tokens" => s.limits.context_tokens = parse_value(line, key, value)?,
                "prompt_overhead_tokens" => {
                    s.limits.prompt_overhead_tokens = parse_value(line, key, value)?
                }
                "backend.url" => s.backend.url = Some(value.to_string()),
                "backend.model" => s.backend.model = value.to_string(),
                "backend.api_key_env" => s.backend.api_key_env = Some(value.to_string()),
                "backend.timeout_ms" => {
                    s.backend.timeout = Duration::from_millis(parse_value(line, key, value)?)
                }
                "backend.max_in_flight" => s.backend.max_in_flight = parse_value(line, key, value)?,
                "backend.temperature" => s.backend.temperature = parse_value(line, key, value)?,
                "backend.seed" => s.backend.seed = Some(parse_value(line, key, value)?),
                "quality.support_threshold" => {
                    s.quality.support_threshold = parse_value(line, key, value)?
                }
                "quality.sparse_max" => s.quality.sparse_max = parse_value(line, key, value)?,
                "quality.dense_min" => s.quality.dense_min = parse_value(line, key, value)?,
                "quality.lexicon_dir" => s.lexicon_dir = Some(PathBuf::from(value)),
                "service.port" => s.service.port = parse_value(line, key, value)?,
                "service.allow_raw" => s.service.allow_raw = parse_value(line, key, value)?,
                "service.ui_dir" => s.service.ui_dir = Some(PathBuf::from(value)),
                "prompt.summarise" => {
                    s.templates.summarise =
                        PromptTemplate::custom(Stage::Summarise, value).map_err(template_err)?
                }
                "prompt.actionable" => {
                    s.templates.actionable =
                        PromptTemplate::custom(Stage::Actionable, value).map_err(template_err)?
                }
                other => {
                    return Err(ConfigError::Line {
                        line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&source)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.limits
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.quality
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.backend.max_in_flight == 0 {
            return Err(ConfigError::Invalid(
                "backend.max_in_flight must be > 0".into(),
            ));
        }
        if !(self.backend.temperature.is_finite() && self.backend.temperature >= 0.0) {
            return Err(ConfigError::Invalid(
                "backend.temperature must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Flat view recorded in run manifests. Credentials appear only as the
    /// name of their environment variable.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("context_tokens", self.limits.context_tokens.to_string());
        put(
            "prompt_overhead_tokens",
            self.limits.prompt_overhead_tokens.to_string(),
        );
        if let Some(url) = &self.backend.url {
            put("backend.url", url.clone());
        }
        put("backend.model", self.backend.model.clone());
        if let Some(env) = &self.backend.api_key_env {
            put("backend.api_key_env", env.clone());
        }
        put(
            "backend.timeout_ms",
            self.backend.timeout.as_millis().to_string(),
        );
        put(
            "backend.max_in_flight",
            self.backend.max_in_flight.to_string(),
        );
        put("backend.temperature", self.backend.temperature.to_string());
        if let Some(seed) = self.backend.seed {
            put("backend.seed", seed.to_string());
        }
        put(
            "quality.support_threshold",
            self.quality.support_threshold.to_string(),
        );
        put("quality.sparse_max", self.quality.sparse_max.to_string());
        put("quality.dense_min", self.quality.dense_min.to_string());
        if let Some(dir) = &self.lexicon_dir {
            put("quality.lexicon_dir", dir.display().to_string());
        }
        put(
            "prompt.summarise",
            self.templates.summarise.template.clone(),
        );
        put(
            "prompt.actionable",
            self.templates.actionable.template.clone(),
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{ACTIONABLE_TEMPLATE, SUMMARISE_TEMPLATE};

    #[test]
    fn defaults() {
        let s = Settings::parse("").unwrap();
        assert_eq!(s.limits.context_tokens, 4096);
        assert_eq!(s.limits.prompt_overhead_tokens, 64);
        assert_eq!(s.service.port, 8080);
        assert_eq!(s.backend.max_in_flight, 4);
        assert_eq!(s.templates.summarise.template, SUMMARISE_TEMPLATE);
        assert_eq!(s.templates.actionable.template, ACTIONABLE_TEMPLATE);
    }

    #[test]
    fn parses_keys() {
        let s = Settings::parse(
            "# comment\ncontext_tokens = 2048\nbackend.url = http://h/v1/chat/completions?a=b\n\
             backend.timeout_ms=500\nquality.dense_min = 20\nservice.allow_raw = true\n\
             prompt.summarise = Condense into {X} tokens: {INPUT}\n",
        )
        .unwrap();
        assert_eq!(s.limits.context_tokens, 2048);
        assert_eq!(
            s.backend.url.as_deref(),
            Some("http://h/v1/chat/completions?a=b")
        );
        assert_eq!(s.backend.timeout, Duration::from_millis(500));
        assert_eq!(s.quality.dense_min, 20);
        assert!(s.service.allow_raw);
        assert_eq!(
            s.templates.summarise.template,
            "Condense into {X} tokens: {INPUT}"
        );
        assert_eq!(s.snapshot()["context_tokens"], "2048");
    }

    #[test]
    fn errors_carry_line_numbers() {
        match Settings::parse("context_tokens = 10\nbogus = 1") {
            Err(ConfigError::Line { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Settings::parse("no equals sign"),
            Err(ConfigError::Line { line: 1, .. })
        ));
        assert!(matches!(
            Settings::parse("service.port = x"),
            Err(ConfigError::Line { .. })
        ));
        assert!(matches!(
            Settings::parse("quality.sparse_max = 40"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Settings::parse("prompt.actionable = no placeholder"),
            Err(ConfigError::Line { .. })
        ));
    }
}
