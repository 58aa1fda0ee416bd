//! Service configuration: a TOML file, overridden by `VOCAB_*` environment
//! variables.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {name}: {value:?}")]
    Env { name: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: SocketAddr,
    pub database: DatabaseConfig,
    pub backend: BackendConfig,
    pub auth: AuthConfig,
    pub negotiation: NegotiationConfig,
    /// Writes per user per minute; 0 disables the limit.
    pub rate_limit_per_minute: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            database: DatabaseConfig::default(),
            backend: BackendConfig::default(),
            auth: AuthConfig::default(),
            negotiation: NegotiationConfig::default(),
            rate_limit_per_minute: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatabaseConfig {
    pub url: String,
    pub pool_size: u32,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        Self {
            url: "sqlite://vocab.db".into(),
            pool_size: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Base URL of a chat-completion server, e.g. `http://127.0.0.1:11434`.
    pub url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
    pub max_tokens: u32,
    pub temperature: f32,
    /// Labels the mock backend fails on.
    pub mock_failures: Vec<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            url: None,
            model: None,
            timeout_secs: 60,
            max_tokens: 256,
            temperature: 0.2,
            mock_failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthConfig {
    /// Secret used to sign session tokens.
    pub session_secret: String,
    pub session_ttl_secs: i64,
    /// Enables the built-in identity provider that accepts HS256 assertions
    /// signed with this secret.
    pub test_mode_secret: Option<String>,
    pub oidc: Option<OidcConfig>,
}

impl Default for AuthConfig {
    fn default() -> Self {
        Self {
            session_secret: String::new(),
            session_ttl_secs: 8 * 3600,
            test_mode_secret: None,
            oidc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OidcConfig {
    pub issuer: String,
    pub client_id: String,
    /// The provider's key set (JWKS JSON), saved locally.
    pub jwks_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegotiationConfig {
    pub acceptance_threshold: i64,
    pub stall_window_days: i64,
}

impl Default for NegotiationConfig {
    fn default() -> Self {
        Self {
            acceptance_threshold: 2,
            stall_window_days: 14,
        }
    }
}

fn parse_env<T: std::str::FromStr>(name: &'static str, value: String) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Env { name, value })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_owned(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            match key.as_str() {
                "VOCAB_LISTEN" => self.listen = parse_env("VOCAB_LISTEN", value)?,
                "VOCAB_DATABASE_URL" => self.database.url = value,
                "VOCAB_DATABASE_POOL_SIZE" => self.database.pool_size = parse_env("VOCAB_DATABASE_POOL_SIZE", value)?,
                "VOCAB_BACKEND_URL" => {
                    self.backend.kind = BackendKind::Http;
                    self.backend.url = Some(value);
                }
                "VOCAB_BACKEND_MODEL" => self.backend.model = Some(value),
                "VOCAB_SESSION_SECRET" => self.auth.session_secret = value,
                "VOCAB_TEST_MODE_SECRET" => self.auth.test_mode_secret = Some(value),
                "VOCAB_OIDC_ISSUER" => self.oidc_mut().issuer = value,
                "VOCAB_OIDC_CLIENT_ID" => self.oidc_mut().client_id = value,
                "VOCAB_OIDC_JWKS_PATH" => self.oidc_mut().jwks_path = value.into(),
                "VOCAB_ACCEPTANCE_THRESHOLD" => {
                    self.negotiation.acceptance_threshold = parse_env("VOCAB_ACCEPTANCE_THRESHOLD", value)?
                }
                "VOCAB_STALL_WINDOW_DAYS" => {
                    self.negotiation.stall_window_days = parse_env("VOCAB_STALL_WINDOW_DAYS", value)?
                }
                "VOCAB_RATE_LIMIT_PER_MINUTE" => {
                    self.rate_limit_per_minute = parse_env("VOCAB_RATE_LIMIT_PER_MINUTE", value)?
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn oidc_mut(&mut self) -> &mut OidcConfig {
        self.auth.oidc.get_or_insert_with(|| OidcConfig {
            issuer: String::new(),
            client_id: String::new(),
            jwks_path: PathBuf::new(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.auth.session_secret.len() < 16 {
            return Err(ConfigError::Invalid(
                "auth.session_secret must be at least 16 bytes".into(),
            ));
        }
        if self.auth.test_mode_secret.is_none() && self.auth.oidc.is_none() {
            return Err(ConfigError::Invalid(
                "configure auth.oidc or auth.test_mode_secret".into(),
            ));
        }
        if let Some(oidc) = &self.auth.oidc {
            if oidc.issuer.is_empty() || oidc.client_id.is_empty() {
                return Err(ConfigError::Invalid("auth.oidc needs issuer and client_id".into()));
            }
        }
        if self.backend.kind == BackendKind::Http && (self.backend.url.is_none() || self.backend.model.is_none()) {
            return Err(ConfigError::Invalid("the http backend needs url and model".into()));
        }
        if self.negotiation.stall_window_days < 0 {
            return Err(ConfigError::Invalid("negotiation.stall_window_days must not be negative".into()));
        }
        Ok(())
    }
}
