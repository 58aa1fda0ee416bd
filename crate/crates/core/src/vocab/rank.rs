use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::types::{Definition, VoteTally};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedDefinition {
    pub definition: Definition,
    pub tally: VoteTally,
}

/// Consensus order: higher score first, then older, then smaller id.
pub fn consensus_order(a: &Definition, b: &Definition) -> Ordering {
    b.tally
        .score
        .cmp(&a.tally.score)
        .then_with(|| a.created_at.cmp(&b.created_at))
        .then_with(|| a.id.cmp(&b.id))
}

pub fn rank_definitions<'a>(definitions: impl IntoIterator<Item = &'a Definition>) -> Vec<RankedDefinition> {
    let mut ranked: Vec<&Definition> = definitions.into_iter().collect();
    ranked.sort_by(|a, b| consensus_order(a, b));
    ranked
        .into_iter()
        .map(|d| RankedDefinition {
            definition: d.clone(),
            tally: d.tally,
        })
        .collect()
}
