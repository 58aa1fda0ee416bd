//! Export and import of the event log, and the vocabulary snapshot format.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{DefinitionId, ExampleId, TermId};
use crate::provenance::{check_append, replay, ProvenanceEvent};
use crate::store::Storage;
use crate::vocab::{fold, ActorRef, DefinitionKind, TermState, VoteTally};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedDefinition {
    pub id: DefinitionId,
    pub kind: DefinitionKind,
    pub author: ActorRef,
    pub version: u32,
    pub tally: VoteTally,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedExample {
    pub id: ExampleId,
    pub body: String,
}

/// One line of the vocabulary export: an active term with its definitions
/// in consensus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyRecord {
    pub id: TermId,
    pub label: String,
    pub tags: Vec<String>,
    pub definitions: Vec<ExportedDefinition>,
    pub examples: Vec<ExportedExample>,
}

impl VocabularyRecord {
    pub fn from_state(state: &TermState) -> Self {
        Self {
            id: state.term.id.clone(),
            label: state.term.label.clone(),
            tags: state.term.tags.iter().cloned().collect(),
            definitions: state
                .ranked()
                .into_iter()
                .map(|r| ExportedDefinition {
                    id: r.definition.id,
                    kind: r.definition.kind,
                    author: r.definition.author,
                    version: r.definition.version,
                    tally: r.tally,
                    body: r.definition.body,
                })
                .collect(),
            examples: state
                .examples
                .values()
                .map(|e| ExportedExample {
                    id: e.id.clone(),
                    body: e.body.clone(),
                })
                .collect(),
        }
    }
}

/// The full event log, one canonical JSON object per line in seq order.
pub fn export_event_log(store: &dyn Storage) -> Result<String> {
    let mut out = String::new();
    for event in store.all_events()? {
        out.push_str(&event.to_line());
        out.push('\n');
    }
    Ok(out)
}

/// Active terms in directory order, one JSON object per line.
pub fn export_vocabulary(store: &dyn Storage) -> Result<String> {
    let mut states = Vec::new();
    for id in store.term_ids()? {
        let state = store.load_state(&id)?;
        if state.term.is_active() {
            states.push(state);
        }
    }
    states.sort_by(|a, b| {
        fold(&a.term.label)
            .cmp(&fold(&b.term.label))
            .then_with(|| a.term.id.cmp(&b.term.id))
    });
    let mut out = String::new();
    for state in &states {
        out.push_str(&serde_json::to_string(&VocabularyRecord::from_state(state)).expect("serializable"));
        out.push('\n');
    }
    Ok(out)
}

/// Parse an exported log. Blank lines are skipped; errors carry 1-based
/// line numbers.
pub fn parse_event_log(text: &str) -> Result<Vec<ProvenanceEvent>> {
    let mut events: Vec<ProvenanceEvent> = Vec::new();
    let mut terms = BTreeSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |detail: String| Error::MalformedPayload(format!("line {}: {detail}", index + 1));
        let event = ProvenanceEvent::from_line(line).map_err(|e| at_line(e.to_string()))?;
        if let Some(prev) = events.last() {
            if event.seq <= prev.seq {
                return Err(at_line(format!("seq {} does not follow {}", event.seq, prev.seq)));
            }
        }
        let previous = events.last().map(|e| e.occurred_at);
        check_append(previous, &event.draft(), terms.contains(&event.term_id)).map_err(|e| at_line(e.to_string()))?;
        terms.insert(event.term_id.clone());
        events.push(event);
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub terms: usize,
    pub events: usize,
}

/// Rebuild a store from an exported log. The store must be empty; every
/// term history is replayed and validated before anything is written.
pub fn import_event_log(store: &dyn Storage, text: &str) -> Result<ImportSummary> {
    let events = parse_event_log(text)?;
    let mut by_term: BTreeMap<TermId, Vec<ProvenanceEvent>> = BTreeMap::new();
    for event in &events {
        by_term.entry(event.term_id.clone()).or_default().push(event.clone());
    }
    let states = by_term
        .values()
        .map(|history| replay(history))
        .collect::<Result<Vec<_>>>()?;
    store.import(&states, &events)?;
    Ok(ImportSummary {
        terms: states.len(),
        events: events.len(),
    })
}
