use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::Error;
use crate::ids::{CommentId, DefinitionId, ExampleId, TermId, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    Human,
    Ai,
}

/// Who performed an action: a user, or a registered generation backend.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActorRef {
    pub kind: ActorKind,
    pub id: String,
}

impl ActorRef {
    pub fn human(user: &UserId) -> Self {
        Self {
            kind: ActorKind::Human,
            id: user.as_str().to_owned(),
        }
    }

    pub fn ai(backend_id: impl Into<String>) -> Self {
        Self {
            kind: ActorKind::Ai,
            id: backend_id.into(),
        }
    }

    pub fn is_human(&self) -> bool {
        self.kind == ActorKind::Human
    }

    pub fn is_ai(&self) -> bool {
        self.kind == ActorKind::Ai
    }

    /// The user behind a human actor.
    pub fn user_id(&self) -> Option<UserId> {
        self.is_human().then(|| UserId::new(self.id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermStatus {
    Active,
    Archived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub id: TermId,
    pub label: String,
    pub tags: BTreeSet<String>,
    pub created_by: ActorRef,
    pub created_at: Timestamp,
    pub status: TermStatus,
}

impl Term {
    pub fn is_active(&self) -> bool {
        self.status == TermStatus::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefinitionKind {
    Human,
    Ai,
}

impl DefinitionKind {
    pub fn matches(self, actor: &ActorRef) -> bool {
        matches!(
            (self, actor.kind),
            (DefinitionKind::Human, ActorKind::Human) | (DefinitionKind::Ai, ActorKind::Ai)
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub up: u64,
    pub down: u64,
    pub score: i64,
}

impl VoteTally {
    pub fn from_counts(up: u64, down: u64) -> Self {
        Self {
            up,
            down,
            score: up as i64 - down as i64,
        }
    }

    /// Replace `prior` (if any) with `value`.
    pub fn recast(self, prior: Option<VoteValue>, value: VoteValue) -> Self {
        let (mut up, mut down) = (self.up, self.down);
        match prior {
            Some(VoteValue::Up) => up -= 1,
            Some(VoteValue::Down) => down -= 1,
            None => {}
        }
        match value {
            VoteValue::Up => up += 1,
            VoteValue::Down => down += 1,
        }
        Self::from_counts(up, down)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub id: DefinitionId,
    pub term_id: TermId,
    pub body: String,
    pub author: ActorRef,
    pub kind: DefinitionKind,
    pub version: u32,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    pub tally: VoteTally,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: ExampleId,
    pub term_id: TermId,
    pub body: String,
    pub author: ActorRef,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Feedback,
    Discussion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: CommentId,
    pub term_id: TermId,
    pub target_definition_id: DefinitionId,
    pub author: ActorRef,
    pub body: String,
    pub created_at: Timestamp,
    pub disposition: Disposition,
}

/// An up (+1) or down (-1) vote. Serialized as the bare integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum VoteValue {
    Up,
    Down,
}

impl TryFrom<i64> for VoteValue {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self, Error> {
        match value {
            1 => Ok(VoteValue::Up),
            -1 => Ok(VoteValue::Down),
            other => Err(Error::InvalidValue(other)),
        }
    }
}

impl From<VoteValue> for i64 {
    fn from(value: VoteValue) -> i64 {
        match value {
            VoteValue::Up => 1,
            VoteValue::Down => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub user_id: UserId,
    pub definition_id: DefinitionId,
    pub value: VoteValue,
    pub cast_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Member,
    Admin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub display_name: String,
    /// Subject claim of the federated identity this account is bound to.
    pub identity_subject: String,
    pub role: Role,
}

/// Phase of the AI/human refinement loop for one term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    NoAIDefinition,
    AIProposed,
    FeedbackPending,
    Converged,
    Stalled,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::NoAIDefinition,
        Phase::AIProposed,
        Phase::FeedbackPending,
        Phase::Converged,
        Phase::Stalled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::NoAIDefinition => "NoAIDefinition",
            Phase::AIProposed => "AIProposed",
            Phase::FeedbackPending => "FeedbackPending",
            Phase::Converged => "Converged",
            Phase::Stalled => "Stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationState {
    pub term_id: TermId,
    pub phase: Phase,
    pub pending_feedback: Vec<CommentId>,
    pub last_activity: Timestamp,
}

/// Case-insensitive key used for label uniqueness, search and directory order.
pub fn fold(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Excerpt of at most `max_chars` characters, cut on a char boundary.
pub fn excerpt(text: &str, max_chars: usize) -> String {
    let mut chars = text.chars();
    let head: String = chars.by_ref().take(max_chars).collect();
    if chars.next().is_some() {
        format!("{head}…")
    } else {
        head
    }
}
