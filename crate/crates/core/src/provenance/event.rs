use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{CommentId, DefinitionId, ExampleId, GenerationId, TermId, UserId};
use crate::vocab::{ActorRef, DefinitionKind, Disposition, Phase, VoteValue};

/// Action name as it appears on the wire and in timelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    TermCreated,
    DefinitionAdded,
    DefinitionRevised,
    ExampleAdded,
    CommentAdded,
    VoteCast,
    TagAdded,
    AIGenerationRequested,
    AIGenerationSucceeded,
    AIGenerationFailed,
    NegotiationStateChanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationPurpose {
    Initial,
    Refinement,
}

/// What happened, with the data needed to replay it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", deny_unknown_fields)]
pub enum Action {
    TermCreated {
        label: String,
        tags: BTreeSet<String>,
    },
    DefinitionAdded {
        definition_id: DefinitionId,
        kind: DefinitionKind,
        body: String,
    },
    DefinitionRevised {
        definition_id: DefinitionId,
        version: u32,
        prior_body: String,
        new_body: String,
    },
    ExampleAdded {
        example_id: ExampleId,
        body: String,
    },
    CommentAdded {
        comment_id: CommentId,
        definition_id: DefinitionId,
        disposition: Disposition,
        body: String,
    },
    VoteCast {
        definition_id: DefinitionId,
        user_id: UserId,
        value: VoteValue,
        prior: Option<VoteValue>,
    },
    TagAdded {
        tag: String,
    },
    /// Carries the full prompt and the feedback it consumed, so every
    /// feedback comment can be traced to the prompt that used it.
    AIGenerationRequested {
        generation_id: GenerationId,
        backend_id: String,
        purpose: GenerationPurpose,
        template_version: String,
        feedback: Vec<CommentId>,
        prompt: String,
    },
    AIGenerationSucceeded {
        generation_id: GenerationId,
        backend_id: String,
        latency_ms: u64,
        body: String,
    },
    AIGenerationFailed {
        generation_id: GenerationId,
        backend_id: String,
        latency_ms: u64,
        reason: String,
    },
    NegotiationStateChanged {
        from: Phase,
        to: Phase,
        pending_feedback: Vec<CommentId>,
    },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::TermCreated { .. } => ActionKind::TermCreated,
            Action::DefinitionAdded { .. } => ActionKind::DefinitionAdded,
            Action::DefinitionRevised { .. } => ActionKind::DefinitionRevised,
            Action::ExampleAdded { .. } => ActionKind::ExampleAdded,
            Action::CommentAdded { .. } => ActionKind::CommentAdded,
            Action::VoteCast { .. } => ActionKind::VoteCast,
            Action::TagAdded { .. } => ActionKind::TagAdded,
            Action::AIGenerationRequested { .. } => ActionKind::AIGenerationRequested,
            Action::AIGenerationSucceeded { .. } => ActionKind::AIGenerationSucceeded,
            Action::AIGenerationFailed { .. } => ActionKind::AIGenerationFailed,
            Action::NegotiationStateChanged { .. } => ActionKind::NegotiationStateChanged,
        }
    }

    /// Split into the wire `(action, payload)` pair.
    pub fn to_parts(&self) -> (String, serde_json::Value) {
        let mut value = serde_json::to_value(self).expect("actions always serialize");
        let obj = value.as_object_mut().expect("adjacently tagged");
        let action = obj
            .remove("action")
            .and_then(|a| a.as_str().map(str::to_owned))
            .expect("tag present");
        let payload = obj.remove("payload").unwrap_or(serde_json::Value::Null);
        (action, payload)
    }

    /// Rebuild from a wire `(action, payload)` pair, rejecting payloads whose
    /// shape does not match the action.
    pub fn from_parts(action: &str, payload: serde_json::Value) -> Result<Self> {
        let tagged = serde_json::json!({ "action": action, "payload": payload });
        serde_json::from_value(tagged)
            .map_err(|e| Error::MalformedPayload(format!("{action}: {e}")))
    }
}

/// An event before the log assigns its sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDraft {
    pub term_id: TermId,
    pub actor: ActorRef,
    pub occurred_at: Timestamp,
    pub action: Action,
}

impl EventDraft {
    pub fn sequenced(self, seq: u64) -> ProvenanceEvent {
        ProvenanceEvent {
            seq,
            term_id: self.term_id,
            occurred_at: self.occurred_at,
            actor: self.actor,
            action: self.action,
        }
    }
}

/// One immutable entry of the provenance log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceEvent {
    pub seq: u64,
    pub term_id: TermId,
    pub occurred_at: Timestamp,
    pub actor: ActorRef,
    pub action: Action,
}

/// Wire form with a fixed field order: seq, term_id, occurred_at, actor,
/// action, payload.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    seq: u64,
    term_id: TermId,
    occurred_at: Timestamp,
    actor: ActorRef,
    action: String,
    payload: serde_json::Value,
}

impl ProvenanceEvent {
    pub fn draft(&self) -> EventDraft {
        EventDraft {
            term_id: self.term_id.clone(),
            actor: self.actor.clone(),
            occurred_at: self.occurred_at,
            action: self.action.clone(),
        }
    }

    /// Canonical single-line JSON record.
    pub fn to_line(&self) -> String {
        let (action, payload) = self.action.to_parts();
        let record = EventRecord {
            seq: self.seq,
            term_id: self.term_id.clone(),
            occurred_at: self.occurred_at,
            actor: self.actor.clone(),
            action,
            payload,
        };
        serde_json::to_string(&record).expect("records always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let record: EventRecord = serde_json::from_str(line)
            .map_err(|e| Error::MalformedPayload(format!("bad event record: {e}")))?;
        Ok(Self {
            seq: record.seq,
            term_id: record.term_id,
            occurred_at: record.occurred_at,
            actor: record.actor,
            action: Action::from_parts(&record.action, record.payload)?,
        })
    }
}
