#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use vocab_core::clock::{ManualClock, Timestamp};
use vocab_core::ids::{DefinitionId, TermId, UserId};
use vocab_core::refinement::{BackendRegistry, MockBackend, RetryPolicy};
use vocab_core::store::SqliteStore;
use vocab_core::vocab::{ActorRef, DefinitionKind};
use vocab_core::{ServiceConfig, VocabService};

pub struct Fixture {
    pub service: VocabService,
    pub store: Arc<SqliteStore>,
    pub clock: Arc<ManualClock>,
    pub mock: Arc<MockBackend>,
}

pub fn start() -> Timestamp {
    Utc.with_ymd_and_hms(2025, 3, 3, 9, 0, 0).unwrap()
}

pub fn fixture() -> Fixture {
    fixture_with(MockBackend::new())
}

pub fn fixture_with(mock: MockBackend) -> Fixture {
    let store = Arc::new(SqliteStore::open_migrated(&Default::default()).unwrap());
    fixture_on(store, mock)
}

pub fn fixture_on(store: Arc<SqliteStore>, mock: MockBackend) -> Fixture {
    let clock = Arc::new(ManualClock::new(start()));
    let mock = Arc::new(mock);
    let config = ServiceConfig {
        retry: RetryPolicy {
            base_delay: std::time::Duration::ZERO,
            ..RetryPolicy::default()
        },
        ..ServiceConfig::default()
    };
    let service = VocabService::new(
        store.clone(),
        clock.clone(),
        BackendRegistry::new(mock.clone()),
        config,
    );
    Fixture {
        service,
        store,
        clock,
        mock,
    }
}

impl Fixture {
    pub fn user(&self, name: &str) -> ActorRef {
        let user = self.service.login(&format!("test|{name}"), name).unwrap();
        ActorRef::human(&user.id)
    }

    pub fn user_id(&self, name: &str) -> UserId {
        self.user(name).user_id().unwrap()
    }

    pub fn tick(&self, minutes: i64) {
        self.clock.advance(Duration::minutes(minutes));
    }

    pub fn term(&self, label: &str, actor: &ActorRef) -> TermId {
        self.service
            .create_term(label, &BTreeSet::new(), actor)
            .unwrap()
            .value
            .id
    }

    pub fn human_def(&self, term: &TermId, body: &str, actor: &ActorRef) -> DefinitionId {
        self.service
            .add_definition(term, body, actor, DefinitionKind::Human)
            .unwrap()
            .value
            .id
    }

    /// A term with a human definition and an example, ready for generation.
    pub fn ready_term(&self, label: &str, actor: &ActorRef) -> TermId {
        let term = self.term(label, actor);
        self.human_def(&term, &format!("{label} as used in the lab"), actor);
        self.service
            .add_example(&term, &format!("The sample showed {label} under load."), actor)
            .unwrap();
        term
    }

    pub fn ai_def(&self, term: &TermId) -> DefinitionId {
        self.service
            .term(term)
            .unwrap()
            .ai_definition()
            .expect("term has an AI definition")
            .id
            .clone()
    }
}

/// The melt history: a human definition on day 1, a human comment on day 5,
/// then an example, an AI proposal, feedback, an AI revision and a vote.
pub fn melt_scenario(fx: &Fixture) -> TermId {
    use vocab_core::vocab::Disposition;
    let u1 = fx.user("u1");
    let u2 = fx.user("u2");
    let term = fx.term("melt", &u1);
    let def = fx.human_def(&term, "Transition of a solid to a liquid on heating.", &u1);
    fx.clock.advance(Duration::days(4));
    fx.service
        .add_comment(&def, "Should mention the melting point.", &u2, Disposition::Discussion)
        .unwrap();
    fx.clock.advance(Duration::days(1));
    fx.service
        .add_example(&term, "The alloy began to melt at 660 C.", &u1)
        .unwrap();
    fx.tick(5);
    fx.service.generate_ai_definition(&term, &u1).unwrap();
    let ai = fx.ai_def(&term);
    fx.tick(30);
    fx.service
        .add_comment(&ai, "Say that the temperature stays constant.", &u2, Disposition::Feedback)
        .unwrap();
    fx.tick(5);
    fx.service.run_refinement(&term, &u1).unwrap();
    fx.tick(60);
    fx.service.cast_vote(&u2.user_id().unwrap(), &ai, 1).unwrap();
    term
}

/// Drive `steps` random workflow actions over `terms` fresh terms. Every
/// action that the domain rejects is simply skipped.
pub fn random_workload(fx: &Fixture, rng: &mut impl rand::Rng, terms: usize, steps: usize) -> Vec<TermId> {
    use vocab_core::vocab::Disposition;
    let users: Vec<ActorRef> = (0..4).map(|i| fx.user(&format!("r{i}"))).collect();
    let ids: Vec<TermId> = (0..terms)
        .map(|i| fx.term(&format!("random term {i}"), &users[i % users.len()]))
        .collect();
    for _ in 0..steps {
        let term = &ids[rng.random_range(0..ids.len())];
        let user = &users[rng.random_range(0..users.len())];
        fx.tick(rng.random_range(0..90));
        let state = fx.service.term(term).unwrap();
        let any_def = state.definitions.keys().nth(rng.random_range(0..state.definitions.len().max(1)));
        let _ = match rng.random_range(0..9) {
            0 => fx
                .service
                .add_definition(term, "a community definition", user, DefinitionKind::Human)
                .map(drop),
            1 => fx.service.add_example(term, "used in a sentence", user).map(drop),
            2 => fx.service.generate_ai_definition(term, user).map(drop),
            3 => fx.service.run_refinement(term, user).map(drop),
            4 | 5 => match state.ai_definition() {
                Some(ai) => fx
                    .service
                    .add_comment(&ai.id, "please tighten this", user, Disposition::Feedback)
                    .map(drop),
                None => Ok(()),
            },
            6 => match any_def {
                Some(def) => fx
                    .service
                    .cast_vote(&user.user_id().unwrap(), def, if rng.random_bool(0.6) { 1 } else { -1 })
                    .map(drop),
                None => Ok(()),
            },
            7 => match any_def {
                Some(def) => fx
                    .service
                    .add_comment(def, "a remark", user, Disposition::Discussion)
                    .map(drop),
                None => Ok(()),
            },
            _ => {
                if rng.random_bool(0.5) {
                    fx.clock.advance(Duration::days(15));
                }
                fx.service.evaluate_convergence(term, user).map(drop)
            }
        };
    }
    ids
}
