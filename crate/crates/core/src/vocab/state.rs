use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{CommentId, DefinitionId, ExampleId, TermId, UserId};
use crate::provenance::{Action, EventDraft};

use super::rank::{rank_definitions, RankedDefinition};
use super::types::*;

/// Everything known about one term. This is the event-sourced aggregate:
/// operations below mutate it directly and emit the events that, replayed,
/// rebuild the same value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermState {
    pub term: Term,
    pub definitions: BTreeMap<DefinitionId, Definition>,
    pub examples: BTreeMap<ExampleId, Example>,
    pub comments: BTreeMap<CommentId, Comment>,
    /// definition -> voter -> vote
    pub votes: BTreeMap<DefinitionId, BTreeMap<UserId, Vote>>,
    pub negotiation: NegotiationState,
    /// Number of provenance events recorded for this term.
    pub version: u64,
}

fn non_empty(text: &str, err: Error) -> Result<()> {
    if text.trim().is_empty() {
        Err(err)
    } else {
        Ok(())
    }
}

fn require_human(actor: &ActorRef, what: &str) -> Result<()> {
    if actor.is_human() {
        Ok(())
    } else {
        Err(Error::NotAuthorized(format!("only people may {what}")))
    }
}

impl TermState {
    /// Create a fresh term. Label uniqueness across terms is the caller's
    /// (store's) responsibility.
    pub fn create(
        id: TermId,
        label: &str,
        tags: &BTreeSet<String>,
        actor: &ActorRef,
        now: Timestamp,
    ) -> Result<(Self, EventDraft)> {
        non_empty(label, Error::EmptyLabel)?;
        require_human(actor, "create terms")?;
        let tags = tags
            .iter()
            .map(|t| normalize_tag(t))
            .collect::<Result<BTreeSet<_>>>()?;
        let state = TermState {
            term: Term {
                id: id.clone(),
                label: label.to_owned(),
                tags: tags.clone(),
                created_by: actor.clone(),
                created_at: now,
                status: TermStatus::Active,
            },
            definitions: BTreeMap::new(),
            examples: BTreeMap::new(),
            comments: BTreeMap::new(),
            votes: BTreeMap::new(),
            negotiation: NegotiationState {
                term_id: id.clone(),
                phase: Phase::NoAIDefinition,
                pending_feedback: Vec::new(),
                last_activity: now,
            },
            version: 1,
        };
        let event = EventDraft {
            term_id: id,
            actor: actor.clone(),
            occurred_at: now,
            action: Action::TermCreated {
                label: label.to_owned(),
                tags,
            },
        };
        Ok((state, event))
    }

    pub fn id(&self) -> &TermId {
        &self.term.id
    }

    /// Bookkeeping shared by every event: bump the aggregate version and the
    /// negotiation activity clock.
    pub(crate) fn record(&mut self, actor: &ActorRef, now: Timestamp, action: Action) -> EventDraft {
        self.version += 1;
        self.negotiation.last_activity = now;
        EventDraft {
            term_id: self.term.id.clone(),
            actor: actor.clone(),
            occurred_at: now,
            action,
        }
    }

    pub fn ai_definition(&self) -> Option<&Definition> {
        self.definitions.values().find(|d| d.kind == DefinitionKind::Ai)
    }

    pub fn human_definitions(&self) -> impl Iterator<Item = &Definition> {
        self.definitions
            .values()
            .filter(|d| d.kind == DefinitionKind::Human)
    }

    pub fn definition(&self, id: &DefinitionId) -> Result<&Definition> {
        self.definitions
            .get(id)
            .ok_or_else(|| Error::UnknownDefinition(id.clone()))
    }

    pub fn add_definition(
        &mut self,
        id: DefinitionId,
        body: &str,
        actor: &ActorRef,
        kind: DefinitionKind,
        now: Timestamp,
    ) -> Result<(Definition, EventDraft)> {
        if !self.term.is_active() {
            return Err(Error::UnknownTerm(self.term.id.clone()));
        }
        non_empty(body, Error::EmptyBody)?;
        if !kind.matches(actor) {
            return Err(Error::NotAuthorized(
                "definition kind must match the author".into(),
            ));
        }
        if kind == DefinitionKind::Ai && self.ai_definition().is_some() {
            return Err(Error::AiDefinitionExists);
        }
        let definition = Definition {
            id: id.clone(),
            term_id: self.term.id.clone(),
            body: body.to_owned(),
            author: actor.clone(),
            kind,
            version: 1,
            created_at: now,
            updated_at: now,
            tally: VoteTally::default(),
        };
        self.definitions.insert(id.clone(), definition.clone());
        if kind == DefinitionKind::Ai {
            self.negotiation.phase = Phase::AIProposed;
        }
        let event = self.record(
            actor,
            now,
            Action::DefinitionAdded {
                definition_id: id,
                kind,
                body: body.to_owned(),
            },
        );
        Ok((definition, event))
    }

    pub fn revise_definition(
        &mut self,
        id: &DefinitionId,
        new_body: &str,
        actor: &ActorRef,
        now: Timestamp,
    ) -> Result<(Definition, EventDraft)> {
        let current = self.definition(id)?;
        match (actor.kind, current.kind) {
            (ActorKind::Human, DefinitionKind::Human) if current.author == *actor => {}
            (ActorKind::Ai, DefinitionKind::Ai) => {}
            (ActorKind::Human, DefinitionKind::Ai) => {
                return Err(Error::NotAuthorized(
                    "the AI definition is revised through feedback, not edited".into(),
                ))
            }
            _ => {
                return Err(Error::NotAuthorized(
                    "only the author may revise a definition".into(),
                ))
            }
        }
        non_empty(new_body, Error::EmptyBody)?;
        let definition = self.definitions.get_mut(id).expect("checked above");
        let prior_body = std::mem::replace(&mut definition.body, new_body.to_owned());
        definition.version += 1;
        definition.updated_at = now;
        let revised = definition.clone();
        let event = self.record(
            actor,
            now,
            Action::DefinitionRevised {
                definition_id: id.clone(),
                version: revised.version,
                prior_body,
                new_body: new_body.to_owned(),
            },
        );
        Ok((revised, event))
    }

    pub fn add_example(
        &mut self,
        id: ExampleId,
        body: &str,
        actor: &ActorRef,
        now: Timestamp,
    ) -> Result<(Example, EventDraft)> {
        non_empty(body, Error::EmptyBody)?;
        require_human(actor, "add examples")?;
        let example = Example {
            id: id.clone(),
            term_id: self.term.id.clone(),
            body: body.to_owned(),
            author: actor.clone(),
            created_at: now,
        };
        self.examples.insert(id.clone(), example.clone());
        let event = self.record(
            actor,
            now,
            Action::ExampleAdded {
                example_id: id,
                body: body.to_owned(),
            },
        );
        Ok((example, event))
    }

    pub fn add_comment(
        &mut self,
        id: CommentId,
        definition_id: &DefinitionId,
        body: &str,
        actor: &ActorRef,
        disposition: Disposition,
        now: Timestamp,
    ) -> Result<(Comment, EventDraft)> {
        self.definition(definition_id)?;
        non_empty(body, Error::EmptyBody)?;
        let comment = Comment {
            id: id.clone(),
            term_id: self.term.id.clone(),
            target_definition_id: definition_id.clone(),
            author: actor.clone(),
            body: body.to_owned(),
            created_at: now,
            disposition,
        };
        self.comments.insert(id.clone(), comment.clone());
        let event = self.record(
            actor,
            now,
            Action::CommentAdded {
                comment_id: id,
                definition_id: definition_id.clone(),
                disposition,
                body: body.to_owned(),
            },
        );
        Ok((comment, event))
    }

    /// Upsert `user`'s vote on a definition and return the new tally.
    pub fn cast_vote(
        &mut self,
        user: &UserId,
        definition_id: &DefinitionId,
        value: VoteValue,
        now: Timestamp,
    ) -> Result<(VoteTally, EventDraft)> {
        self.definition(definition_id)?;
        let prior = self
            .votes
            .get(definition_id)
            .and_then(|by_user| by_user.get(user))
            .map(|v| v.value);
        let definition = self.definitions.get_mut(definition_id).expect("checked");
        definition.tally = definition.tally.recast(prior, value);
        let tally = definition.tally;
        self.votes.entry(definition_id.clone()).or_default().insert(
            user.clone(),
            Vote {
                user_id: user.clone(),
                definition_id: definition_id.clone(),
                value,
                cast_at: now,
            },
        );
        let event = self.record(
            &ActorRef::human(user),
            now,
            Action::VoteCast {
                definition_id: definition_id.clone(),
                user_id: user.clone(),
                value,
                prior,
            },
        );
        Ok((tally, event))
    }

    /// Add a tag. Returns no event when the tag is already present.
    pub fn tag(
        &mut self,
        tag: &str,
        actor: &ActorRef,
        now: Timestamp,
    ) -> Result<Option<EventDraft>> {
        let tag = normalize_tag(tag)?;
        if !self.term.tags.insert(tag.clone()) {
            return Ok(None);
        }
        Ok(Some(self.record(actor, now, Action::TagAdded { tag })))
    }

    pub fn ranked(&self) -> Vec<RankedDefinition> {
        rank_definitions(self.definitions.values())
    }

    /// Recompute every tally from the stored votes.
    pub fn recomputed_tallies(&self) -> BTreeMap<DefinitionId, VoteTally> {
        self.definitions
            .keys()
            .map(|id| {
                let (up, down) = self
                    .votes
                    .get(id)
                    .map(|by_user| {
                        by_user.values().fold((0, 0), |(u, d), v| match v.value {
                            VoteValue::Up => (u + 1, d),
                            VoteValue::Down => (u, d + 1),
                        })
                    })
                    .unwrap_or((0, 0));
                (id.clone(), VoteTally::from_counts(up, down))
            })
            .collect()
    }

    /// Canonical serialization used to compare live and replayed state.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("term state always serializes")
    }
}

pub fn normalize_tag(tag: &str) -> Result<String> {
    let folded = fold(tag);
    if folded.is_empty() {
        Err(Error::EmptyTag)
    } else {
        Ok(folded)
    }
}
