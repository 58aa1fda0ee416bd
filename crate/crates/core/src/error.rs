use thiserror::Error;

use crate::ids::{DefinitionId, TermId, UserId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the vocabulary domain, provenance log, refinement loop and
/// store can report. Each variant has a stable machine code (see [`Error::code`]).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("term label must not be empty")]
    EmptyLabel,
    #[error("an active term labelled {label:?} already exists")]
    DuplicateLabel { label: String },
    #[error("unknown term {0}")]
    UnknownTerm(TermId),
    #[error("body must not be empty")]
    EmptyBody,
    #[error("tag must not be empty")]
    EmptyTag,
    #[error("term already has an AI definition")]
    AiDefinitionExists,
    #[error("unknown definition {0}")]
    UnknownDefinition(DefinitionId),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("vote value must be +1 or -1, got {0}")]
    InvalidValue(i64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed event payload: {0}")]
    MalformedPayload(String),
    #[error("corrupt history for {term_id}: {detail}")]
    CorruptHistory { term_id: TermId, detail: String },
    #[error("event timestamp {occurred_at} lags the previous event ({previous}) by more than the allowed skew")]
    ClockSkew {
        occurred_at: String,
        previous: String,
    },

    #[error("AI generation needs at least one example on the term")]
    NoExample,
    #[error("term has no AI definition")]
    NoAIDefinition,
    #[error("no pending feedback to refine with")]
    NoPendingFeedback,
    #[error("a generation is already in flight for this term")]
    GenerationInProgress,
    #[error("generation backend {backend} unavailable: {detail}")]
    BackendUnavailable { backend: String, detail: String },

    #[error("concurrent write on the same term, retry")]
    ConflictRetry,
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
    #[error("schema version {found} does not match required version {expected}")]
    SchemaMismatch { found: i64, expected: i64 },
    #[error("migration {version} failed: {detail}")]
    MigrationFailure { version: i64, detail: String },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyLabel => "EmptyLabel",
            Error::DuplicateLabel { .. } => "DuplicateLabel",
            Error::UnknownTerm(_) => "UnknownTerm",
            Error::EmptyBody => "EmptyBody",
            Error::EmptyTag => "EmptyTag",
            Error::AiDefinitionExists => "AiDefinitionExists",
            Error::UnknownDefinition(_) => "UnknownDefinition",
            Error::UnknownUser(_) => "UnknownUser",
            Error::NotAuthorized(_) => "NotAuthorized",
            Error::InvalidValue(_) => "InvalidValue",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::MalformedPayload(_) => "MalformedPayload",
            Error::CorruptHistory { .. } => "CorruptHistory",
            Error::ClockSkew { .. } => "ClockSkew",
            Error::NoExample => "NoExample",
            Error::NoAIDefinition => "NoAIDefinition",
            Error::NoPendingFeedback => "NoPendingFeedback",
            Error::GenerationInProgress => "GenerationInProgress",
            Error::BackendUnavailable { .. } => "BackendUnavailable",
            Error::ConflictRetry => "ConflictRetry",
            Error::StorageUnavailable(_) => "StorageUnavailable",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
            Error::MigrationFailure { .. } => "MigrationFailure",
        }
    }

    pub(crate) fn corrupt(term_id: &TermId, detail: impl Into<String>) -> Self {
        Error::CorruptHistory {
            term_id: term_id.clone(),
            detail: detail.into(),
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(err: rusqlite::Error) -> Self {
        Error::StorageUnavailable(err.to_string())
    }
}
