//! Random multi-user activity against a real service on a virtual clock.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;
use vocab_core::clock::{ManualClock, Timestamp};
use vocab_core::ids::{TermId, UserId};
use vocab_core::refinement::{BackendRegistry, MockBackend, RetryPolicy};
use vocab_core::store::{SqliteStore, StoreConfig};
use vocab_core::vocab::{ActorRef, DefinitionKind, Disposition};
use vocab_core::{ServiceConfig, VocabService};

pub fn start() -> Timestamp {
    Utc.with_ymd_and_hms(2025, 3, 3, 9, 0, 0).unwrap()
}

pub struct World {
    pub service: VocabService,
    pub store: Arc<SqliteStore>,
    pub clock: Arc<ManualClock>,
    pub users: Vec<UserId>,
    pub terms: Vec<TermId>,
}

pub fn world(mock: MockBackend, users: usize) -> World {
    let store = Arc::new(SqliteStore::open_migrated(&StoreConfig::default()).unwrap());
    let clock = Arc::new(ManualClock::new(start()));
    let config = ServiceConfig {
        retry: RetryPolicy {
            max_retries: 3,
            base_delay: Duration::ZERO,
        },
        ..ServiceConfig::default()
    };
    let service = VocabService::new(store.clone(), clock.clone(), BackendRegistry::new(Arc::new(mock)), config);
    let users = (0..users)
        .map(|i| service.login(&format!("load|u{i}"), &format!("User {i}")).unwrap().id)
        .collect();
    World {
        service,
        store,
        clock,
        users,
        terms: Vec::new(),
    }
}

impl World {
    pub fn actor(&self, user: &UserId) -> ActorRef {
        ActorRef::human(user)
    }

    /// A term with one human definition and one example.
    pub fn ready_term(&mut self, label: &str, owner: usize) -> TermId {
        let actor = self.actor(&self.users[owner]);
        let term = self.service.create_term(label, &BTreeSet::new(), &actor).unwrap().value.id;
        self.service
            .add_definition(&term, &format!("{label} means something"), &actor, DefinitionKind::Human)
            .unwrap();
        self.service.add_example(&term, &format!("an example of {label}"), &actor).unwrap();
        self.terms.push(term.clone());
        term
    }

    /// Apply `steps` random actions; domain refusals are part of the mix.
    pub fn churn(&mut self, rng: &mut impl Rng, steps: usize) {
        for _ in 0..steps {
            let term = self.terms.choose(rng).unwrap().clone();
            let user = self.users.choose(rng).unwrap().clone();
            let actor = self.actor(&user);
            let s = &self.service;
            let state = s.term(&term).unwrap();
            let ai = state.ai_definition().map(|d| d.id.clone());
            let any_def = state.definitions.keys().cloned().collect::<Vec<_>>().choose(rng).cloned();
            let _ = match rng.random_range(0..12) {
                0 => s.add_definition(&term, "another reading", &actor, DefinitionKind::Human).map(drop),
                1 => s.add_example(&term, "seen in the lab", &actor).map(drop),
                2 | 3 => s.generate_ai_definition(&term, &actor).map(drop),
                4 => s.run_refinement(&term, &actor).map(drop),
                5 | 6 => match ai {
                    Some(ai) => s.add_comment(&ai, "please tighten the wording", &actor, Disposition::Feedback).map(drop),
                    None => Ok(()),
                },
                7 => match any_def {
                    Some(def) => s.add_comment(&def, "I read it differently", &actor, Disposition::Discussion).map(drop),
                    None => Ok(()),
                },
                8 | 9 => match any_def {
                    Some(def) => s.cast_vote(&user, &def, if rng.random_bool(0.7) { 1 } else { -1 }).map(drop),
                    None => Ok(()),
                },
                10 => match any_def {
                    Some(def) => s.revise_definition(&def, "reworded", &actor).map(drop),
                    None => Ok(()),
                },
                _ => {
                    if rng.random_bool(0.3) {
                        self.clock.advance(chrono::Duration::days(15));
                    }
                    s.evaluate_convergence(&term, &actor).map(drop)
                }
            };
            if rng.random_bool(0.2) {
                self.clock.advance(chrono::Duration::minutes(rng.random_range(1..90)));
            }
        }
    }
}

/// A populated world: `terms` terms, then `steps` random actions.
pub fn random_world(rng: &mut impl Rng, terms: usize, steps: usize) -> World {
    let mut w = world(MockBackend::new().failing_on(["term-3", "term-17"]), 5);
    for i in 0..terms {
        let owner = i % w.users.len();
        w.ready_term(&format!("term-{i}"), owner);
    }
    w.churn(rng, steps);
    w
}
