//! Append-only provenance log: event types, append rules, replay and
//! timeline rendering.

mod event;
mod log;
mod replay;
mod timeline;

pub use event::{Action, ActionKind, EventDraft, GenerationPurpose, ProvenanceEvent};
pub use log::{check_append, clock_skew, MemoryLog};
pub use replay::replay;
pub use timeline::{entry as timeline_entry, timeline, TimelineEntry, TimelineOrder};
