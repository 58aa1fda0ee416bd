use std::collections::HashSet;

use chrono::Duration;

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::TermId;

use super::event::{Action, EventDraft, ProvenanceEvent};

/// How far an event's timestamp may lag the previous event. Ordering is
/// decided by `seq`; timestamps are informational.
pub fn clock_skew() -> Duration {
    Duration::seconds(5)
}

/// Checks shared by every append path.
pub fn check_append(previous: Option<Timestamp>, draft: &EventDraft, term_known: bool) -> Result<()> {
    match (&draft.action, term_known) {
        (Action::TermCreated { .. }, true) => {
            return Err(Error::corrupt(&draft.term_id, "term created twice"));
        }
        (Action::TermCreated { .. }, false) | (_, true) => {}
        (_, false) => return Err(Error::UnknownTerm(draft.term_id.clone())),
    }
    if let Some(previous) = previous {
        if draft.occurred_at < previous - clock_skew() {
            return Err(Error::ClockSkew {
                occurred_at: draft.occurred_at.to_rfc3339(),
                previous: previous.to_rfc3339(),
            });
        }
    }
    Ok(())
}

/// In-process append-only log with a single global sequence.
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    events: Vec<ProvenanceEvent>,
    terms: HashSet<TermId>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, draft: EventDraft) -> Result<u64> {
        check_append(
            self.events.last().map(|e| e.occurred_at),
            &draft,
            self.terms.contains(&draft.term_id),
        )?;
        let seq = self.events.last().map_or(1, |e| e.seq + 1);
        self.terms.insert(draft.term_id.clone());
        self.events.push(draft.sequenced(seq));
        Ok(seq)
    }

    pub fn events(&self) -> &[ProvenanceEvent] {
        &self.events
    }

    pub fn events_for(&self, term: &TermId) -> Vec<ProvenanceEvent> {
        self.events
            .iter()
            .filter(|e| &e.term_id == term)
            .cloned()
            .collect()
    }

    pub fn to_lines(&self) -> String {
        self.events.iter().map(|e| e.to_line() + "\n").collect()
    }
}
