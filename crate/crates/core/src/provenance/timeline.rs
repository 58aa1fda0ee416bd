use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::vocab::{excerpt, ActorKind, ActorRef, DefinitionKind, Disposition, VoteValue};

use super::event::{Action, ActionKind, GenerationPurpose, ProvenanceEvent};

const EXCERPT_CHARS: usize = 120;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimelineOrder {
    OldestFirst,
    #[default]
    NewestFirst,
}

impl std::str::FromStr for TimelineOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oldest_first" => Ok(TimelineOrder::OldestFirst),
            "newest_first" => Ok(TimelineOrder::NewestFirst),
            other => Err(format!("unknown order {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub seq: u64,
    pub occurred_at: Timestamp,
    pub actor_kind: ActorKind,
    pub actor_id: String,
    pub action: ActionKind,
    pub summary: String,
    pub payload_excerpt: String,
}

/// Render the events of one term. Callers pass only that term's events.
pub fn timeline(events: &[ProvenanceEvent], order: TimelineOrder) -> Vec<TimelineEntry> {
    let mut entries: Vec<TimelineEntry> = events.iter().map(entry).collect();
    entries.sort_by_key(|e| e.seq);
    if order == TimelineOrder::NewestFirst {
        entries.reverse();
    }
    entries
}

fn who(actor: &ActorRef) -> &str {
    match actor.kind {
        ActorKind::Ai => "AI",
        ActorKind::Human => &actor.id,
    }
}

pub fn entry(event: &ProvenanceEvent) -> TimelineEntry {
    let actor = who(&event.actor);
    let (summary, detail) = match &event.action {
        Action::TermCreated { label, .. } => (format!("{actor} created the term"), label.clone()),
        Action::DefinitionAdded { kind, body, .. } => {
            let what = match kind {
                DefinitionKind::Ai => "an AI definition",
                DefinitionKind::Human => "a definition",
            };
            (format!("{actor} added {what}"), body.clone())
        }
        Action::DefinitionRevised { new_body, version, .. } => (
            format!("{actor} revised the definition (v{version})"),
            new_body.clone(),
        ),
        Action::ExampleAdded { body, .. } => (format!("{actor} added an example"), body.clone()),
        Action::CommentAdded {
            disposition, body, ..
        } => {
            let verb = match disposition {
                Disposition::Feedback => "left feedback on",
                Disposition::Discussion => "commented on",
            };
            (format!("{actor} {verb} a definition"), body.clone())
        }
        Action::VoteCast {
            value,
            definition_id,
            ..
        } => {
            let verb = match value {
                VoteValue::Up => "up-voted",
                VoteValue::Down => "down-voted",
            };
            (format!("{actor} {verb} a definition"), definition_id.to_string())
        }
        Action::TagAdded { tag } => (format!("{actor} tagged the term"), tag.clone()),
        Action::AIGenerationRequested {
            purpose,
            feedback,
            template_version,
            ..
        } => {
            let what = match purpose {
                GenerationPurpose::Initial => "an AI definition",
                GenerationPurpose::Refinement => "an AI revision",
            };
            (
                format!("{actor} requested {what}"),
                format!("template {template_version}, {} feedback item(s)", feedback.len()),
            )
        }
        Action::AIGenerationSucceeded { body, .. } => (format!("{actor} generated text"), body.clone()),
        Action::AIGenerationFailed { reason, .. } => (format!("{actor} generation failed"), reason.clone()),
        Action::NegotiationStateChanged { from, to, .. } => (
            format!("{actor} moved the negotiation to {}", to.as_str()),
            format!("{} -> {}", from.as_str(), to.as_str()),
        ),
    };
    TimelineEntry {
        seq: event.seq,
        occurred_at: event.occurred_at,
        actor_kind: event.actor.kind,
        actor_id: event.actor.id.clone(),
        action: event.action.kind(),
        summary,
        payload_excerpt: excerpt(&detail, EXCERPT_CHARS),
    }
}
