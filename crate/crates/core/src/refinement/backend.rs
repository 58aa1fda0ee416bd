use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    /// Label of the term being defined. Adapters for real model servers send
    /// only the prompt; the mock uses it for its failure schedule.
    pub term_label: String,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success { body: String },
    Failure { reason: String },
}

/// A well-formed answer from a backend, successful or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResult {
    pub backend_id: String,
    pub latency: Duration,
    pub outcome: Outcome,
}

impl GenerationResult {
    pub fn success(backend_id: impl Into<String>, latency: Duration, body: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            latency,
            outcome: Outcome::Success { body: body.into() },
        }
    }

    pub fn failure(backend_id: impl Into<String>, latency: Duration, reason: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            latency,
            outcome: Outcome::Failure {
                reason: reason.into(),
            },
        }
    }

    pub fn body(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Success { body } => Some(body),
            Outcome::Failure { .. } => None,
        }
    }

    pub fn failure_reason(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Success { .. } => None,
            Outcome::Failure { reason } => Some(reason),
        }
    }
}

/// Transport-level failure: the backend could not be reached or answered
/// with something that is not a generation result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unavailable(pub String);

impl fmt::Display for Unavailable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, Unavailable>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

/// Call `backend`, retrying transport failures with exponential backoff.
/// A failure *result* is returned as-is and never retried.
pub fn generate_with_retry(
    backend: &dyn GenerationBackend,
    request: &GenerationRequest,
    policy: RetryPolicy,
) -> Result<GenerationResult> {
    let mut retry = 0;
    loop {
        match backend.generate(request) {
            Ok(result) => return Ok(result),
            Err(Unavailable(detail)) if retry >= policy.max_retries => {
                return Err(Error::BackendUnavailable {
                    backend: backend.id().to_owned(),
                    detail: format!("{detail} (after {retry} retries)"),
                })
            }
            Err(_) => {
                std::thread::sleep(policy.delay_before_retry(retry));
                retry += 1;
            }
        }
    }
}

/// Registered backends by id. AI actors must name one of these.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn GenerationBackend>>,
    default_id: String,
}

impl BackendRegistry {
    pub fn new(default: Arc<dyn GenerationBackend>) -> Self {
        let default_id = default.id().to_owned();
        let mut backends = BTreeMap::new();
        backends.insert(default_id.clone(), default);
        Self {
            backends,
            default_id,
        }
    }

    pub fn register(&mut self, backend: Arc<dyn GenerationBackend>) {
        self.backends.insert(backend.id().to_owned(), backend);
    }

    pub fn default_backend(&self) -> Arc<dyn GenerationBackend> {
        self.backends[&self.default_id].clone()
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn GenerationBackend>> {
        self.backends.get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.backends.contains_key(id)
    }
}

impl fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendRegistry")
            .field("backends", &self.backends.keys().collect::<Vec<_>>())
            .field("default_id", &self.default_id)
            .finish()
    }
}
