//! Seed files: a TOML list of starter terms.
//!
//! ```toml
//! [[term]]
//! label = "melt"
//! tags = ["phase change"]
//! example = "Ice melts at 0 C under atmospheric pressure."
//!
//! [term.definition]
//! body = "The transition of a solid into a liquid."
//! author = "Seed Curator"
//! ```

use std::collections::BTreeSet;

use serde::Deserialize;
use toml::Spanned;
use vocab_core::vocab::{fold, ActorRef, DefinitionKind};
use vocab_core::{Error, VocabService};

use crate::error::{toml_error, AdminError};

/// Identity subjects of seed accounts live under this issuer.
pub const SEED_ISSUER: &str = "vocab-seed";
pub const SEED_ACTOR: &str = "seed";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedDefinition {
    pub body: String,
    /// Display name of the person credited with the definition.
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRecord {
    pub label: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    pub definition: Option<SeedDefinition>,
    pub example: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedFile {
    #[serde(default)]
    term: Vec<Spanned<SeedRecord>>,
}

pub fn parse_seed(text: &str) -> Result<Vec<SeedRecord>, AdminError> {
    let file: SeedFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(file.term.len());
    for spanned in file.term {
        let span = spanned.span();
        let record = spanned.into_inner();
        if record.label.trim().is_empty() {
            return Err(AdminError::parse(text, Some(span), "label must not be empty"));
        }
        if let Some(def) = &record.definition {
            if def.author.trim().is_empty() {
                return Err(AdminError::parse(text, Some(span), "a definition must name its author"));
            }
        }
        if !seen.insert(fold(&record.label)) {
            return Err(Error::DuplicateLabel { label: record.label }.into());
        }
        records.push(record);
    }
    Ok(records)
}

fn seed_user(service: &VocabService, name: &str) -> Result<ActorRef, AdminError> {
    let user = service.login(&format!("{SEED_ISSUER}|{name}"), name)?;
    Ok(ActorRef::human(&user.id))
}

/// Create every record. Labels are checked against the store before anything
/// is written, so a rejected file leaves the store untouched.
pub fn seed(service: &VocabService, records: &[SeedRecord]) -> Result<usize, AdminError> {
    for record in records {
        if service.store().find_active_label(&record.label)?.is_some() {
            return Err(Error::DuplicateLabel {
                label: record.label.clone(),
            }
            .into());
        }
    }
    let actor = seed_user(service, SEED_ACTOR)?;
    for record in records {
        let term = service.create_term(&record.label, &record.tags, &actor)?.value;
        if let Some(def) = &record.definition {
            let author = seed_user(service, &def.author)?;
            service.add_definition(&term.id, &def.body, &author, DefinitionKind::Human)?;
        }
        if let Some(example) = &record.example {
            service.add_example(&term.id, example, &actor)?;
        }
    }
    Ok(records.len())
}
