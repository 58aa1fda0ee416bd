//! Collaborative vocabulary: terms, competing definitions, votes, AI
//! proposals refined by human feedback, and an append-only provenance log
//! that every state change is recorded in.

pub mod clock;
pub mod error;
pub mod export;
pub mod ids;
pub mod provenance;
pub mod refinement;
pub mod service;
pub mod store;
pub mod vocab;

pub use error::{Error, Result};
pub use service::{VocabService, ServiceConfig};
