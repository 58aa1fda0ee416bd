//! Study scripts: who does what, when.
//!
//! ```toml
//! start = "2025-03-03T09:00:00Z"
//! failures = ["creep"]          # labels the mock backend fails on
//!
//! [[user]]
//! name = "u1"
//! display_name = "Participant 1"
//!
//! [[action]]
//! at = "2025-03-03T09:00:00Z"
//! user = "u1"
//! do = "create_term"
//! term = "melt"
//! ```
//!
//! Actions: `create_term`, `define`, `example`, `tag`, `generate`, `refine`,
//! `comment`, `vote`, `evaluate`. Comments and votes name their target with
//! `on = "ai"`, `"human"` or `"human:N"` (the Nth human definition of the
//! term, oldest first).

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::Deserialize;
use toml::Spanned;
use vocab_core::clock::Timestamp;

use crate::error::{toml_error, AdminError};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptUser {
    pub name: String,
    pub display_name: Option<String>,
}

/// Which definition of a term a comment or vote targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Ai,
    /// 1-based, oldest human definition first.
    Human(usize),
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ai" => Ok(Target::Ai),
            "human" => Ok(Target::Human(1)),
            other => other
                .strip_prefix("human:")
                .and_then(|n| n.parse().ok())
                .filter(|n| *n > 0)
                .map(Target::Human)
                .ok_or_else(|| format!("unknown definition target {other:?}")),
        }
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum Step {
    CreateTerm {
        term: String,
        #[serde(default)]
        tags: BTreeSet<String>,
    },
    Define { term: String, body: String },
    Example { term: String, body: String },
    Tag { term: String, tag: String },
    Generate { term: String },
    Refine { term: String },
    Comment {
        term: String,
        on: Target,
        body: String,
        #[serde(default)]
        feedback: bool,
    },
    Vote { term: String, on: Target, value: i64 },
    Evaluate { term: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScriptAction {
    pub at: Timestamp,
    pub user: String,
    #[serde(flatten)]
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    pub start: Timestamp,
    pub users: Vec<ScriptUser>,
    pub actions: Vec<ScriptAction>,
    /// Term labels the mock backend fails on.
    pub failures: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    start: Timestamp,
    #[serde(default)]
    failures: BTreeSet<String>,
    #[serde(default)]
    user: Vec<ScriptUser>,
    #[serde(default)]
    action: Vec<Spanned<ScriptAction>>,
}

pub fn parse_script(text: &str) -> Result<Script, AdminError> {
    let file: ScriptFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let mut names = BTreeMap::new();
    for user in &file.user {
        if user.name.trim().is_empty() || names.insert(user.name.clone(), ()).is_some() {
            return Err(AdminError::parse(text, None, format!("bad or repeated user name {:?}", user.name)));
        }
    }
    let mut previous = file.start;
    let mut actions = Vec::with_capacity(file.action.len());
    for spanned in file.action {
        let span = spanned.span();
        let action = spanned.into_inner();
        if action.at < previous {
            return Err(AdminError::parse(text, Some(span), "action timestamps must not decrease"));
        }
        if !names.contains_key(&action.user) {
            return Err(AdminError::parse(text, Some(span), format!("undeclared user {:?}", action.user)));
        }
        previous = action.at;
        actions.push(action);
    }
    Ok(Script {
        start: file.start,
        users: file.user,
        actions,
        failures: file.failures,
    })
}
