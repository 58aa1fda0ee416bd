//! Operator tooling: seeding, study scripts and the scripted study run.

pub mod error;
pub mod scenario;
pub mod seed;
pub mod simulate;

pub use error::AdminError;
pub use scenario::{parse_script, Script};
pub use seed::{parse_seed, seed, SeedRecord};
pub use simulate::{simulate_study, StudyRun, StudySummary};
