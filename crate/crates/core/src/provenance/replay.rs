//! Rebuild a [`TermState`] from its event history.
//!
//! This path is deliberately independent of the operations in
//! [`crate::vocab`]: it only trusts what the events say, and refuses
//! histories that could not have been produced by those operations.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ids::TermId;
use crate::vocab::*;

use super::event::{Action, ProvenanceEvent};

pub fn replay(events: &[ProvenanceEvent]) -> Result<TermState> {
    let Some((first, rest)) = events.split_first() else {
        return Err(Error::corrupt(&TermId::new("?"), "empty history"));
    };
    let term_id = first.term_id.clone();
    let Action::TermCreated { label, tags } = &first.action else {
        return Err(Error::corrupt(&term_id, "history does not begin with TermCreated"));
    };
    let mut state = TermState {
        term: Term {
            id: term_id.clone(),
            label: label.clone(),
            tags: tags.clone(),
            created_by: first.actor.clone(),
            created_at: first.occurred_at,
            status: TermStatus::Active,
        },
        definitions: BTreeMap::new(),
        examples: BTreeMap::new(),
        comments: BTreeMap::new(),
        votes: BTreeMap::new(),
        negotiation: NegotiationState {
            term_id: term_id.clone(),
            phase: Phase::NoAIDefinition,
            pending_feedback: Vec::new(),
            last_activity: first.occurred_at,
        },
        version: 1,
    };
    let mut last_seq = first.seq;
    for event in rest {
        if event.term_id != term_id {
            return Err(Error::corrupt(
                &term_id,
                format!("event {} belongs to {}", event.seq, event.term_id),
            ));
        }
        if event.seq <= last_seq {
            return Err(Error::corrupt(
                &term_id,
                format!("seq {} does not follow {}", event.seq, last_seq),
            ));
        }
        last_seq = event.seq;
        apply(&mut state, event)?;
        state.version += 1;
        state.negotiation.last_activity = event.occurred_at;
    }
    Ok(state)
}

fn apply(state: &mut TermState, event: &ProvenanceEvent) -> Result<()> {
    let term_id = state.term.id.clone();
    let corrupt = |detail: String| Error::corrupt(&term_id, format!("seq {}: {detail}", event.seq));
    let at = event.occurred_at;
    match &event.action {
        Action::TermCreated { .. } => return Err(corrupt("term created twice".into())),
        Action::DefinitionAdded {
            definition_id,
            kind,
            body,
        } => {
            if state.definitions.contains_key(definition_id) {
                return Err(corrupt(format!("definition {definition_id} added twice")));
            }
            if *kind == DefinitionKind::Ai {
                if state.definitions.values().any(|d| d.kind == DefinitionKind::Ai) {
                    return Err(corrupt("second AI definition".into()));
                }
                if state.negotiation.phase != Phase::NoAIDefinition {
                    return Err(corrupt("AI definition added outside NoAIDefinition".into()));
                }
                state.negotiation.phase = Phase::AIProposed;
            }
            state.definitions.insert(
                definition_id.clone(),
                Definition {
                    id: definition_id.clone(),
                    term_id: term_id.clone(),
                    body: body.clone(),
                    author: event.actor.clone(),
                    kind: *kind,
                    version: 1,
                    created_at: at,
                    updated_at: at,
                    tally: VoteTally::default(),
                },
            );
        }
        Action::DefinitionRevised {
            definition_id,
            version,
            prior_body,
            new_body,
        } => {
            let def = state
                .definitions
                .get_mut(definition_id)
                .ok_or_else(|| corrupt(format!("revision of unknown {definition_id}")))?;
            if *version != def.version + 1 {
                return Err(corrupt(format!(
                    "version gap on {definition_id}: {} -> {version}",
                    def.version
                )));
            }
            if def.body != *prior_body {
                return Err(corrupt(format!("prior body mismatch on {definition_id}")));
            }
            def.body = new_body.clone();
            def.version = *version;
            def.updated_at = at;
        }
        Action::ExampleAdded { example_id, body } => {
            let previous = state.examples.insert(
                example_id.clone(),
                Example {
                    id: example_id.clone(),
                    term_id: term_id.clone(),
                    body: body.clone(),
                    author: event.actor.clone(),
                    created_at: at,
                },
            );
            if previous.is_some() {
                return Err(corrupt(format!("example {example_id} added twice")));
            }
        }
        Action::CommentAdded {
            comment_id,
            definition_id,
            disposition,
            body,
        } => {
            if !state.definitions.contains_key(definition_id) {
                return Err(corrupt(format!("comment on unknown {definition_id}")));
            }
            let previous = state.comments.insert(
                comment_id.clone(),
                Comment {
                    id: comment_id.clone(),
                    term_id: term_id.clone(),
                    target_definition_id: definition_id.clone(),
                    author: event.actor.clone(),
                    body: body.clone(),
                    created_at: at,
                    disposition: *disposition,
                },
            );
            if previous.is_some() {
                return Err(corrupt(format!("comment {comment_id} added twice")));
            }
        }
        Action::VoteCast {
            definition_id,
            user_id,
            value,
            prior,
        } => {
            let def = state
                .definitions
                .get_mut(definition_id)
                .ok_or_else(|| corrupt(format!("vote on unknown {definition_id}")))?;
            let by_user = state.votes.entry(definition_id.clone()).or_default();
            let recorded_prior = by_user.get(user_id).map(|v| v.value);
            if recorded_prior != *prior {
                return Err(corrupt(format!("vote prior mismatch for {user_id}")));
            }
            let (mut up, mut down) = (def.tally.up, def.tally.down);
            match prior {
                Some(VoteValue::Up) => up -= 1,
                Some(VoteValue::Down) => down -= 1,
                None => {}
            }
            match value {
                VoteValue::Up => up += 1,
                VoteValue::Down => down += 1,
            }
            def.tally = VoteTally::from_counts(up, down);
            by_user.insert(
                user_id.clone(),
                Vote {
                    user_id: user_id.clone(),
                    definition_id: definition_id.clone(),
                    value: *value,
                    cast_at: at,
                },
            );
        }
        Action::TagAdded { tag } => {
            if !state.term.tags.insert(tag.clone()) {
                return Err(corrupt(format!("tag {tag:?} added twice")));
            }
        }
        Action::AIGenerationRequested { .. }
        | Action::AIGenerationSucceeded { .. }
        | Action::AIGenerationFailed { .. } => {}
        Action::NegotiationStateChanged {
            from,
            to,
            pending_feedback,
        } => {
            if state.negotiation.phase != *from {
                return Err(corrupt(format!(
                    "negotiation change from {} while in {}",
                    from.as_str(),
                    state.negotiation.phase.as_str()
                )));
            }
            if let Some(missing) = pending_feedback
                .iter()
                .find(|c| !state.comments.contains_key(*c))
            {
                return Err(corrupt(format!("pending feedback {missing} is not a comment")));
            }
            state.negotiation.phase = *to;
            state.negotiation.pending_feedback = pending_feedback.clone();
        }
    }
    Ok(())
}
