//! Terms, definitions, examples, comments, votes and tags, with the rules
//! that govern them. No storage or transport concerns live here.

mod rank;
mod state;
mod types;

pub use rank::{consensus_order, rank_definitions, RankedDefinition};
pub use state::{normalize_tag, TermState};
pub use types::*;
