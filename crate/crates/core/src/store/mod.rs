//! Durable storage for terms, users and the provenance log.
//!
//! Entities live in normalized tables for fast reads; every commit writes
//! them together with the events that explain them, in one transaction.
//! `load_aggregate(t).state == replay(load_aggregate(t).events)` is the
//! invariant the audit checks.

mod migrations;
mod sqlite;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ids::{DefinitionId, TermId, UserId};
use crate::provenance::{EventDraft, ProvenanceEvent};
use crate::vocab::{Term, TermState, User};

pub use migrations::LATEST_SCHEMA_VERSION;
pub use sqlite::{CommitFault, SqliteStore, StoreConfig};

pub const MAX_PAGE_SIZE: usize = 500;

/// A term with everything attached to it, plus its event slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermAggregate {
    pub state: TermState,
    pub events: Vec<ProvenanceEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchField {
    Label,
    Tag,
    Definition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub term: Term,
    pub matched_on: MatchField,
    /// Top-ranked definition, if the term has any.
    pub definition_id: Option<DefinitionId>,
    pub excerpt: Option<String>,
}

/// One atomic write for one term.
#[derive(Debug, Clone, Copy)]
pub struct Commit<'a> {
    pub term_id: &'a TermId,
    /// Aggregate version the mutation was computed from; `None` for a new term.
    pub expected_version: Option<u64>,
    pub state: &'a TermState,
    pub events: &'a [EventDraft],
}

pub trait Storage: Send + Sync {
    fn schema_version(&self) -> Result<i64>;

    /// Apply pending migrations up to `target`. Re-running at the current
    /// version is a no-op.
    fn migrate(&self, target: i64) -> Result<i64>;

    /// Allocate the next counter value for an id prefix.
    fn next_id(&self, prefix: &str) -> Result<u64>;

    /// Write entity rows and events atomically. Fails with `ConflictRetry`
    /// when the stored aggregate version differs from `expected_version`.
    fn commit(&self, commit: Commit<'_>) -> Result<Vec<u64>>;

    fn load_aggregate(&self, term: &TermId) -> Result<TermAggregate>;

    fn load_state(&self, term: &TermId) -> Result<TermState>;

    fn events_for(&self, term: &TermId) -> Result<Vec<ProvenanceEvent>>;

    fn all_events(&self) -> Result<Vec<ProvenanceEvent>>;

    /// Every term id, in id order.
    fn term_ids(&self) -> Result<Vec<TermId>>;

    fn term_of_definition(&self, definition: &DefinitionId) -> Result<TermId>;

    fn find_active_label(&self, label: &str) -> Result<Option<TermId>>;

    fn search_terms(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>>;

    fn list_directory(&self, page: usize, page_size: usize) -> Result<Vec<Term>>;

    /// Find the user bound to `subject`, creating it on first sight.
    fn upsert_user(&self, subject: &str, display_name: &str) -> Result<User>;

    fn user(&self, id: &UserId) -> Result<Option<User>>;

    /// Load a complete, already validated history into an empty store.
    fn import(&self, states: &[TermState], events: &[ProvenanceEvent]) -> Result<()>;

    fn is_empty(&self) -> Result<bool>;
}
