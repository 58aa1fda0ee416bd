//! HTTP interface for the vocabulary service.

pub mod auth;
pub mod backend;
pub mod config;
pub mod error;
pub mod ratelimit;
pub mod routes;

use std::sync::Arc;
use std::time::Duration;

use vocab_core::clock::Clock;
use vocab_core::refinement::{
    BackendRegistry, GenerationBackend, GenerationParams, MockBackend, NegotiationPolicy,
};
use vocab_core::store::Storage;
use vocab_core::{ServiceConfig, VocabService};

pub use auth::Authenticator;
pub use config::{Config, ConfigError};
pub use error::ApiError;
pub use ratelimit::RateLimiter;
pub use routes::{route_specs, router, AppState, RouteSpec};

use crate::backend::ChatCompletionBackend;
use crate::config::BackendKind;

/// The generation backend the config asks for.
pub fn backend_from_config(config: &Config) -> Result<Arc<dyn GenerationBackend>, ConfigError> {
    let backend = &config.backend;
    Ok(match backend.kind {
        BackendKind::Mock => Arc::new(MockBackend::new().failing_on(backend.mock_failures.iter().cloned())),
        BackendKind::Http => {
            let (Some(url), Some(model)) = (&backend.url, &backend.model) else {
                return Err(ConfigError::Invalid("http backend needs url and model".into()));
            };
            let client = ChatCompletionBackend::new(url, model, Duration::from_secs(backend.timeout_secs))
                .map_err(|e| ConfigError::Invalid(format!("cannot build http client: {e}")))?;
            Arc::new(client)
        }
    })
}

pub fn service_config(config: &Config) -> ServiceConfig {
    ServiceConfig {
        policy: NegotiationPolicy {
            acceptance_threshold: config.negotiation.acceptance_threshold,
            stall_window: chrono::Duration::days(config.negotiation.stall_window_days),
        },
        params: GenerationParams {
            max_tokens: config.backend.max_tokens,
            temperature: config.backend.temperature,
        },
        ..ServiceConfig::default()
    }
}

/// Assemble the application state from a validated config.
pub fn build_state(
    config: &Config,
    store: Arc<dyn Storage>,
    clock: Arc<dyn Clock>,
    backend: Arc<dyn GenerationBackend>,
) -> Result<AppState, ConfigError> {
    let service = VocabService::new(store, clock, BackendRegistry::new(backend), service_config(config));
    Ok(AppState::new(
        Arc::new(service),
        Authenticator::from_config(&config.auth)?,
        RateLimiter::new(config.rate_limit_per_minute),
    ))
}
