//! The vocabulary service: every workflow step as one call, each producing
//! exactly the provenance events that describe it and committing them
//! together with the entity changes.

use std::collections::{BTreeSet, HashSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, Timestamp};
use crate::error::{Error, Result};
use crate::ids::{CommentId, DefinitionId, ExampleId, GenerationId, TermId, UserId};
use crate::provenance::{replay, timeline, EventDraft, GenerationPurpose, TimelineEntry, TimelineOrder};
use crate::refinement::{
    generate_with_retry, BackendRegistry, GenerationBackend, GenerationOutcome, GenerationParams,
    GenerationPlan, GenerationRequest, NegotiationPolicy, RetryPolicy,
};
use crate::store::{Commit, SearchHit, Storage};
use crate::vocab::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceConfig {
    pub policy: NegotiationPolicy,
    pub retry: RetryPolicy,
    pub params: GenerationParams,
    /// Attempts per write before a per-term conflict is surfaced.
    pub commit_attempts: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            policy: NegotiationPolicy::default(),
            retry: RetryPolicy::default(),
            params: GenerationParams::default(),
            commit_attempts: 8,
        }
    }
}

/// A committed result with the sequence numbers of the events it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committed<T> {
    pub value: T,
    pub seqs: Vec<u64>,
}

impl<T> Committed<T> {
    pub fn last_seq(&self) -> Option<u64> {
        self.seqs.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentReceipt {
    pub comment: Comment,
    /// Set when the comment was queued as negotiation feedback.
    pub negotiation: Option<NegotiationState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditMismatch {
    pub term_id: TermId,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub terms_checked: usize,
    pub mismatches: Vec<AuditMismatch>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

struct InFlight {
    terms: Arc<Mutex<HashSet<TermId>>>,
    term: TermId,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        if let Ok(mut terms) = self.terms.lock() {
            terms.remove(&self.term);
        }
    }
}

/// A reserved generation slot for one term. At most one ticket per term
/// exists at a time; dropping it releases the slot.
pub struct GenerationTicket {
    pub generation_id: GenerationId,
    pub term_id: TermId,
    pub purpose: GenerationPurpose,
    plan: GenerationPlan,
    requester: ActorRef,
    backend: Arc<dyn GenerationBackend>,
    _slot: InFlight,
}

impl std::fmt::Debug for GenerationTicket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenerationTicket")
            .field("generation_id", &self.generation_id)
            .field("term_id", &self.term_id)
            .field("purpose", &self.purpose)
            .finish_non_exhaustive()
    }
}

pub struct VocabService {
    store: Arc<dyn Storage>,
    clock: Arc<dyn Clock>,
    backends: BackendRegistry,
    config: ServiceConfig,
    in_flight: Arc<Mutex<HashSet<TermId>>>,
}

impl VocabService {
    pub fn new(
        store: Arc<dyn Storage>,
        clock: Arc<dyn Clock>,
        backends: BackendRegistry,
        config: ServiceConfig,
    ) -> Self {
        Self {
            store,
            clock,
            backends,
            config,
            in_flight: Arc::default(),
        }
    }

    pub fn store(&self) -> &Arc<dyn Storage> {
        &self.store
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    fn allocate<T>(&self, make: fn(u64) -> T, prefix: &str) -> Result<T> {
        Ok(make(self.store.next_id(prefix)?))
    }

    fn check_actor(&self, actor: &ActorRef) -> Result<()> {
        match actor.kind {
            ActorKind::Human => {
                self.user(&UserId::new(actor.id.clone()))?;
            }
            ActorKind::Ai if !self.backends.contains(&actor.id) => {
                return Err(Error::NotAuthorized(format!(
                    "{} is not a registered generation backend",
                    actor.id
                )))
            }
            ActorKind::Ai => {}
        }
        Ok(())
    }

    /// Load, mutate, commit; retry from a fresh load on per-term conflicts.
    fn mutate<T>(
        &self,
        term: &TermId,
        mut op: impl FnMut(&mut TermState, Timestamp) -> Result<(T, Vec<EventDraft>)>,
    ) -> Result<Committed<T>> {
        let attempts = self.config.commit_attempts.max(1);
        for _ in 0..attempts {
            let mut state = self.store.load_state(term)?;
            let expected = state.version;
            let (value, events) = op(&mut state, self.clock.now())?;
            if events.is_empty() {
                return Ok(Committed {
                    value,
                    seqs: Vec::new(),
                });
            }
            match self.store.commit(Commit {
                term_id: term,
                expected_version: Some(expected),
                state: &state,
                events: &events,
            }) {
                Ok(seqs) => return Ok(Committed { value, seqs }),
                Err(Error::ConflictRetry) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(Error::ConflictRetry)
    }

    pub fn login(&self, subject: &str, display_name: &str) -> Result<User> {
        self.store.upsert_user(subject, display_name)
    }

    pub fn user(&self, id: &UserId) -> Result<User> {
        self.store
            .user(id)?
            .ok_or_else(|| Error::UnknownUser(id.clone()))
    }

    pub fn create_term(&self, label: &str, tags: &BTreeSet<String>, actor: &ActorRef) -> Result<Committed<Term>> {
        if label.trim().is_empty() {
            return Err(Error::EmptyLabel);
        }
        self.check_actor(actor)?;
        if self.store.find_active_label(label)?.is_some() {
            return Err(Error::DuplicateLabel {
                label: label.to_owned(),
            });
        }
        let id = self.allocate(TermId::from_counter, TermId::PREFIX)?;
        let (state, event) = TermState::create(id.clone(), label, tags, actor, self.clock.now())?;
        let seqs = self.store.commit(Commit {
            term_id: &id,
            expected_version: None,
            state: &state,
            events: std::slice::from_ref(&event),
        })?;
        Ok(Committed {
            value: state.term,
            seqs,
        })
    }

    pub fn term(&self, id: &TermId) -> Result<TermState> {
        self.store.load_state(id)
    }

    pub fn add_definition(
        &self,
        term: &TermId,
        body: &str,
        actor: &ActorRef,
        kind: DefinitionKind,
    ) -> Result<Committed<Definition>> {
        self.check_actor(actor)?;
        self.mutate(term, |state, now| {
            // validate before allocating an id
            if body.trim().is_empty() {
                return Err(Error::EmptyBody);
            }
            let id = self.allocate(DefinitionId::from_counter, DefinitionId::PREFIX)?;
            let (def, event) = state.add_definition(id, body, actor, kind, now)?;
            Ok((def, vec![event]))
        })
    }

    pub fn revise_definition(&self, definition: &DefinitionId, body: &str, actor: &ActorRef) -> Result<Committed<Definition>> {
        self.check_actor(actor)?;
        let term = self.store.term_of_definition(definition)?;
        self.mutate(&term, |state, now| {
            let (def, event) = state.revise_definition(definition, body, actor, now)?;
            Ok((def, vec![event]))
        })
    }

    pub fn add_example(&self, term: &TermId, body: &str, actor: &ActorRef) -> Result<Committed<Example>> {
        self.check_actor(actor)?;
        self.mutate(term, |state, now| {
            if body.trim().is_empty() {
                return Err(Error::EmptyBody);
            }
            let id = self.allocate(ExampleId::from_counter, ExampleId::PREFIX)?;
            let (example, event) = state.add_example(id, body, actor, now)?;
            Ok((example, vec![event]))
        })
    }

    /// Comment on a definition. Feedback on the AI definition is also queued
    /// for the next refinement, in the same commit.
    pub fn add_comment(
        &self,
        definition: &DefinitionId,
        body: &str,
        actor: &ActorRef,
        disposition: Disposition,
    ) -> Result<Committed<CommentReceipt>> {
        self.check_actor(actor)?;
        let term = self.store.term_of_definition(definition)?;
        self.mutate(&term, |state, now| {
            if body.trim().is_empty() {
                return Err(Error::EmptyBody);
            }
            let id = self.allocate(CommentId::from_counter, CommentId::PREFIX)?;
            let (comment, event) = state.add_comment(id, definition, body, actor, disposition, now)?;
            let mut events = vec![event];
            let is_ai_target = state.definition(definition)?.kind == DefinitionKind::Ai;
            let negotiation = if disposition == Disposition::Feedback && is_ai_target {
                let (negotiation, event) = state.submit_feedback(&comment.id, actor, now)?;
                events.push(event);
                Some(negotiation)
            } else {
                None
            };
            Ok((
                CommentReceipt {
                    comment,
                    negotiation,
                },
                events,
            ))
        })
    }

    /// Queue an existing feedback comment.
    pub fn submit_feedback(&self, term: &TermId, comment: &CommentId, actor: &ActorRef) -> Result<Committed<NegotiationState>> {
        self.check_actor(actor)?;
        self.mutate(term, |state, now| {
            let (negotiation, event) = state.submit_feedback(comment, actor, now)?;
            Ok((negotiation, vec![event]))
        })
    }

    /// Upsert a vote. A vote on the AI definition also re-evaluates
    /// convergence.
    pub fn cast_vote(&self, user: &UserId, definition: &DefinitionId, value: i64) -> Result<Committed<VoteTally>> {
        let term = self.store.term_of_definition(definition)?;
        self.user(user)?;
        let value = VoteValue::try_from(value)?;
        let policy = self.config.policy;
        self.mutate(&term, |state, now| {
            let (tally, event) = state.cast_vote(user, definition, value, now)?;
            let mut events = vec![event];
            if state.definition(definition)?.kind == DefinitionKind::Ai {
                if let (_, Some(event)) = state.evaluate_convergence(now, &policy, &ActorRef::human(user))? {
                    events.push(event);
                }
            }
            Ok((tally, events))
        })
    }

    pub fn tag_term(&self, term: &TermId, tag: &str, actor: &ActorRef) -> Result<Committed<Term>> {
        self.check_actor(actor)?;
        self.mutate(term, |state, now| {
            let event = state.tag(tag, actor, now)?;
            Ok((state.term.clone(), event.into_iter().collect()))
        })
    }

    pub fn rank_definitions(&self, term: &TermId) -> Result<Vec<RankedDefinition>> {
        Ok(self.store.load_state(term)?.ranked())
    }

    fn reserve(&self, term: &TermId) -> Result<InFlight> {
        let mut terms = self
            .in_flight
            .lock()
            .map_err(|_| Error::StorageUnavailable("generation registry poisoned".into()))?;
        if !terms.insert(term.clone()) {
            return Err(Error::GenerationInProgress);
        }
        Ok(InFlight {
            terms: self.in_flight.clone(),
            term: term.clone(),
        })
    }

    /// Check preconditions and reserve the term's generation slot. The
    /// backend is not called yet.
    pub fn start_generation(&self, term: &TermId, purpose: GenerationPurpose, requester: &ActorRef) -> Result<GenerationTicket> {
        self.check_actor(requester)?;
        let state = self.store.load_state(term)?;
        let plan = match purpose {
            GenerationPurpose::Initial => state.plan_initial_generation()?,
            GenerationPurpose::Refinement => state.plan_refinement()?,
        };
        let slot = self.reserve(term)?;
        let generation_id = self.allocate(GenerationId::from_counter, GenerationId::PREFIX)?;
        Ok(GenerationTicket {
            generation_id,
            term_id: term.clone(),
            purpose,
            plan,
            requester: requester.clone(),
            backend: self.backends.default_backend(),
            _slot: slot,
        })
    }

    /// Call the backend for a reserved slot and commit the outcome.
    /// Transport failures surface as `BackendUnavailable` and record nothing.
    pub fn run_generation(&self, ticket: GenerationTicket) -> Result<Committed<GenerationOutcome>> {
        let request = GenerationRequest {
            prompt: ticket.plan.bundle.rendered.clone(),
            term_label: ticket.plan.bundle.term_label.clone(),
            params: self.config.params,
        };
        let result = generate_with_retry(ticket.backend.as_ref(), &request, self.config.retry)?;
        self.mutate(&ticket.term_id, |state, now| {
            state.complete_generation(
                &ticket.plan,
                &ticket.generation_id,
                &result,
                &ticket.requester,
                || self.allocate(DefinitionId::from_counter, DefinitionId::PREFIX),
                now,
            )
        })
    }

    pub fn generate_ai_definition(&self, term: &TermId, requester: &ActorRef) -> Result<Committed<GenerationOutcome>> {
        let ticket = self.start_generation(term, GenerationPurpose::Initial, requester)?;
        self.run_generation(ticket)
    }

    pub fn run_refinement(&self, term: &TermId, requester: &ActorRef) -> Result<Committed<GenerationOutcome>> {
        let ticket = self.start_generation(term, GenerationPurpose::Refinement, requester)?;
        self.run_generation(ticket)
    }

    pub fn evaluate_convergence(&self, term: &TermId, actor: &ActorRef) -> Result<Committed<NegotiationState>> {
        self.check_actor(actor)?;
        let policy = self.config.policy;
        self.mutate(term, |state, now| {
            let (negotiation, event) = state.evaluate_convergence(now, &policy, actor)?;
            Ok((negotiation, event.into_iter().collect()))
        })
    }

    pub fn timeline(&self, term: &TermId, order: TimelineOrder) -> Result<Vec<TimelineEntry>> {
        Ok(timeline(&self.store.events_for(term)?, order))
    }

    pub fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>> {
        self.store.search_terms(query, limit)
    }

    pub fn directory(&self, page: usize, page_size: usize) -> Result<Vec<Term>> {
        self.store.list_directory(page, page_size)
    }

    /// Compare every stored aggregate against the replay of its events.
    pub fn audit(&self) -> Result<AuditReport> {
        audit(self.store.as_ref())
    }
}

pub fn audit(store: &dyn Storage) -> Result<AuditReport> {
    let ids = store.term_ids()?;
    let mut report = AuditReport {
        terms_checked: ids.len(),
        mismatches: Vec::new(),
    };
    for id in ids {
        let detail = match store.load_aggregate(&id) {
            Err(e) => Some(format!("stored aggregate unreadable: {e}")),
            Ok(aggregate) => match replay(&aggregate.events) {
                Err(e) => Some(format!("replay failed: {e}")),
                Ok(replayed) if replayed == aggregate.state => None,
                Ok(replayed) => Some(describe_difference(&aggregate.state, &replayed)),
            },
        };
        if let Some(detail) = detail {
            report.mismatches.push(AuditMismatch { term_id: id, detail });
        }
    }
    Ok(report)
}

fn describe_difference(stored: &TermState, replayed: &TermState) -> String {
    let stored = serde_json::to_value(stored).expect("serializable");
    let replayed = serde_json::to_value(replayed).expect("serializable");
    let fields: Vec<&str> = stored
        .as_object()
        .expect("struct")
        .iter()
        .filter(|(k, v)| replayed.get(k.as_str()) != Some(*v))
        .map(|(k, _)| k.as_str())
        .collect();
    format!("stored rows differ from replayed events in: {}", fields.join(", "))
}
