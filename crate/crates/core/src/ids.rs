//! Opaque identifiers.
//!
//! Identifiers are allocated from per-kind counters in the store and rendered
//! as `<prefix>-<zero padded counter>`, so lexicographic order matches
//! allocation order. Once issued an identifier is never reassigned.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub fn new(raw: impl Into<String>) -> Self {
                Self(raw.into())
            }

            pub fn from_counter(n: u64) -> Self {
                Self(format!("{}-{:06}", $prefix, n))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            /// Numeric suffix when the id was issued by a counter.
            pub fn counter(&self) -> Option<u64> {
                self.0
                    .strip_prefix($prefix)
                    .and_then(|rest| rest.strip_prefix('-'))
                    .and_then(|n| n.parse().ok())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(raw: &str) -> Self {
                Self(raw.to_owned())
            }
        }
    };
}

opaque_id!(
    /// Stable term identifier, safe to cite from outside the service.
    TermId,
    "term"
);
opaque_id!(DefinitionId, "def");
opaque_id!(ExampleId, "ex");
opaque_id!(CommentId, "cmt");
opaque_id!(UserId, "user");
opaque_id!(
    /// Tracking id of one generation act (initial or refinement).
    GenerationId,
    "gen"
);
