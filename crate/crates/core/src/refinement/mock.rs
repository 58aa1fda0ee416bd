//! Deterministic offline backend.
//!
//! The generated text is a fixed preamble followed by a digest of the
//! prompt, so identical prompts always produce identical definitions and a
//! changed prompt (new feedback, new example) produces a new one.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::backend::{GenerationBackend, GenerationRequest, GenerationResult, Unavailable};

pub const MOCK_PREAMBLE: &str = "Working definition drafted from the supplied examples and feedback; prompt digest ";

#[derive(Debug)]
pub struct MockBackend {
    id: String,
    failing_labels: BTreeSet<String>,
    transport_failures: Mutex<BTreeMap<String, u32>>,
    delay: Duration,
    calls: AtomicU64,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self {
            id: "mock".into(),
            failing_labels: BTreeSet::new(),
            transport_failures: Mutex::new(BTreeMap::new()),
            delay: Duration::ZERO,
            calls: AtomicU64::new(0),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Every generation for these term labels returns a failure result.
    pub fn failing_on<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.failing_labels.extend(labels.into_iter().map(Into::into));
        self
    }

    /// The next `times` calls for `label` fail at the transport level.
    pub fn unavailable_for(self, label: impl Into<String>, times: u32) -> Self {
        self.transport_failures
            .lock()
            .expect("mock poisoned")
            .insert(label.into(), times);
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn digest(prompt: &str) -> String {
        let digest = Sha256::digest(prompt.as_bytes());
        hex::encode(&digest[..8])
    }
}

impl GenerationBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, Unavailable> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        {
            let mut transport = self.transport_failures.lock().expect("mock poisoned");
            if let Some(remaining) = transport.get_mut(&request.term_label) {
                if *remaining > 0 {
                    *remaining -= 1;
                    return Err(Unavailable(format!(
                        "mock transport failure for {:?}",
                        request.term_label
                    )));
                }
            }
        }
        if self.failing_labels.contains(&request.term_label) {
            return Ok(GenerationResult::failure(
                &self.id,
                Duration::ZERO,
                format!("scripted failure for {:?}", request.term_label),
            ));
        }
        let body = format!("{MOCK_PREAMBLE}{}.", Self::digest(&request.prompt));
        Ok(GenerationResult::success(&self.id, Duration::ZERO, body))
    }
}
