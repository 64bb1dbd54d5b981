use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{section}: {message}")]
    Invalid { section: &'static str, message: String },
}

/// Service configuration, read from a TOML file with one block per provider.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub literature: LiteratureConfig,
    pub fulltext: FullTextConfig,
    pub embedding: EmbeddingConfig,
    pub llm: LlmConfig,
    pub projection: ProjectionConfig,
    pub extraction: ExtractionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub port: u16,
    pub data_dir: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: 8080,
            data_dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Fixture,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiteratureConfig {
    pub provider: ProviderKind,
    /// JSON-lines corpus used in fixture mode.
    pub fixture: Option<PathBuf>,
    pub base_url: Option<String>,
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FullTextConfig {
    pub provider: ProviderKind,
    /// Defaults to the literature fixture.
    pub fixture: Option<PathBuf>,
    pub base_url: Option<String>,
    /// Contact address some open-access resolvers require.
    pub email: Option<String>,
    pub token: Option<String>,
    /// Defaults to `<data_dir>/fulltext`.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    #[default]
    Fallback,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingKind,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: LlmKind,
    /// Scripted-response file used in offline mode.
    pub script: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub seed: u64,
    pub min_distance: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            seed: 0,
            min_distance: synroute_core::projection::DEFAULT_MIN_DISTANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub max_retries: usize,
    pub top_k: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            max_retries: synroute_core::extraction::DEFAULT_MAX_RETRIES,
            top_k: synroute_core::extraction::DEFAULT_TOP_K,
        }
    }
}

/// Environment variables that override provider tokens.
pub const TOKEN_VARIABLES: [(&str, &str); 4] = [
    ("literature", "SYNROUTE_LITERATURE_TOKEN"),
    ("fulltext", "SYNROUTE_FULLTEXT_TOKEN"),
    ("embedding", "SYNROUTE_EMBEDDING_TOKEN"),
    ("llm", "SYNROUTE_LLM_TOKEN"),
];

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads the file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Config::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.server.data_dir);
        for p in [
            self.literature.fixture.as_mut(),
            self.fulltext.fixture.as_mut(),
            self.fulltext.cache_dir.as_mut(),
            self.llm.script.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Replaces provider tokens with values from `lookup`, typically `std::env::var`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (section, var) in TOKEN_VARIABLES {
            if let Some(value) = lookup(var).filter(|v| !v.is_empty()) {
                let slot = match section {
                    "literature" => &mut self.literature.token,
                    "fulltext" => &mut self.fulltext.token,
                    "embedding" => &mut self.embedding.token,
                    _ => &mut self.llm.token,
                };
                *slot = Some(value);
            }
        }
    }

    pub fn fulltext_cache_dir(&self) -> PathBuf {
        self.fulltext
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.server.data_dir.join("fulltext"))
    }

    /// Checks that every selected provider has what it needs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let need = |section: &'static str, ok: bool, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    section,
                    message: message.to_string(),
                })
            }
        };
        match self.literature.provider {
            ProviderKind::Fixture => need("literature", self.literature.fixture.is_some(), "fixture path required")?,
            ProviderKind::Http => need("literature", self.literature.base_url.is_some(), "base_url required")?,
        }
        match self.fulltext.provider {
            ProviderKind::Fixture => need(
                "fulltext",
                self.fulltext.fixture.is_some() || self.literature.fixture.is_some(),
                "fixture path required",
            )?,
            ProviderKind::Http => need("fulltext", self.fulltext.base_url.is_some(), "base_url required")?,
        }
        if self.embedding.provider == EmbeddingKind::Http {
            need(
                "embedding",
                self.embedding.base_url.is_some() && self.embedding.model.is_some(),
                "base_url and model required",
            )?;
        }
        match self.llm.provider {
            LlmKind::Scripted => need("llm", self.llm.script.is_some(), "script path required")?,
            LlmKind::Http => need(
                "llm",
                self.llm.base_url.is_some() && self.llm.model.is_some(),
                "base_url and model required",
            )?,
        }
        Ok(())
    }
}
