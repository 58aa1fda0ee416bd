//! Prompt construction, the pluggable generation backend contract and the
//! negotiation state machine driving AI revisions from human feedback.

mod backend;
mod mock;
mod negotiation;
mod prompt;

pub use backend::{
    generate_with_retry, BackendRegistry, GenerationBackend, GenerationParams, GenerationRequest,
    GenerationResult, Outcome, RetryPolicy, Unavailable,
};
pub use mock::{MockBackend, MOCK_PREAMBLE};
pub use negotiation::{
    is_allowed_transition, GenerationOutcome, GenerationPlan, NegotiationPolicy, TRANSITIONS,
};
pub use prompt::{build_prompt, PromptBundle, TEMPLATE_VERSION};
