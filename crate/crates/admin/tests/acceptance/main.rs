//! Release gate: one PASS/FAIL line per acceptance criterion, each checked
//! against its time budget.

mod workload;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Method, Request};
use chrono::TimeZone;
use http_body_util::BodyExt;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use vocab_admin::{parse_script, simulate_study, StudySummary};
use vocab_api::auth::test_assertion;
use vocab_api::{router, AppState, Authenticator, RateLimiter};
use vocab_core::clock::{ManualClock, Timestamp};
use vocab_core::export::{export_event_log, export_vocabulary, import_event_log};
use vocab_core::ids::{CommentId, DefinitionId, GenerationId, TermId, UserId};
use vocab_core::provenance::{replay, Action, ActionKind, GenerationPurpose, TimelineOrder};
use vocab_core::refinement::{BackendRegistry, GenerationResult, MockBackend, NegotiationPolicy, RetryPolicy};
use vocab_core::service::audit;
use vocab_core::store::{SqliteStore, Storage, StoreConfig};
use vocab_core::vocab::{ActorRef, DefinitionKind, Disposition, Phase, TermState, VoteValue};
use vocab_core::{Error, ServiceConfig, VocabService};

use faulty::FaultyStore;
use workload::{random_world, start, world};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------

fn study_replication() -> Check {
    let script = parse_script(include_str!("../../scenarios/study.toml")).map_err(|e| e.to_string())?;
    let fresh = || Arc::new(SqliteStore::open_migrated(&StoreConfig::default()).unwrap());
    let first = simulate_study(&script, fresh()).map_err(|e| e.to_string())?;
    let second = simulate_study(&script, fresh()).map_err(|e| e.to_string())?;
    let StudySummary {
        terms,
        ai_definitions,
        generation_failures,
        terms_with_two_human_definitions,
        ..
    } = first.summary;
    ensure((terms, ai_definitions, generation_failures) == (20, 19, 1), || {
        format!("summary {:?}", first.summary)
    })?;
    ensure(terms_with_two_human_definitions >= 1, || "no term with two human definitions".into())?;
    ensure(first.summary == second.summary, || "summaries differ between runs".into())?;
    ensure(first.event_log == second.event_log, || "event logs differ between runs".into())?;
    Ok(format!(
        "terms={terms} ai_definitions={ai_definitions} generation_failures={generation_failures} two_human={terms_with_two_human_definitions}"
    ))
}

// ---------------------------------------------------------------------------

fn ai_count(state: &TermState) -> usize {
    state.definitions.values().filter(|d| d.kind == DefinitionKind::Ai).count()
}

fn single_ai_definition() -> Check {
    const TERMS: usize = 200;
    const THREADS: u64 = 4;
    const STEPS: usize = 400;
    let mut w = world(MockBackend::new().with_delay(Duration::from_micros(300)).failing_on(["t-7", "t-70"]), 6);
    for i in 0..TERMS {
        w.ready_term(&format!("t-{i}"), i % 6);
    }
    let violation: Mutex<Option<String>> = Mutex::new(None);
    let codes: Mutex<BTreeMap<&'static str, usize>> = Mutex::default();
    let done = AtomicBool::new(false);
    let service = &w.service;
    let terms = &w.terms;
    let users = &w.users;
    let check = |term: &TermId| {
        let n = ai_count(&service.term(term).unwrap());
        if n > 1 {
            *violation.lock().unwrap() = Some(format!("{term} has {n} AI definitions"));
        }
    };
    std::thread::scope(|scope| {
        scope.spawn(|| {
            while !done.load(Ordering::SeqCst) {
                for term in terms.iter().step_by(7) {
                    check(term);
                }
            }
        });
        let workers: Vec<_> = (0..THREADS)
            .map(|seed| {
                let check = &check;
                let codes = &codes;
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    // Concentrate on a few terms at a time so threads collide.
                    for step in 0..STEPS {
                        let window = (step / 40) * 20;
                        let term = &terms[(window + rng.random_range(0..20)) % TERMS];
                        let user = users.choose(&mut rng).unwrap();
                        let actor = ActorRef::human(user);
                        let result = match rng.random_range(0..6) {
                            0 | 1 => service.start_generation(term, GenerationPurpose::Initial, &actor).and_then(|ticket| {
                                if rng.random_bool(0.5) {
                                    std::thread::yield_now();
                                }
                                service.run_generation(ticket).map(drop)
                            }),
                            2 => service.run_refinement(term, &actor).map(drop),
                            3 | 4 => match service.term(term).unwrap().ai_definition() {
                                Some(ai) => service
                                    .add_comment(&ai.id, "needs work", &actor, Disposition::Feedback)
                                    .map(drop),
                                None => service.generate_ai_definition(term, &actor).map(drop),
                            },
                            _ => {
                                let state = service.term(term).unwrap();
                                let def = state.definitions.keys().next().unwrap().clone();
                                service.add_comment(&def, "thoughts", &actor, Disposition::Discussion).map(drop)
                            }
                        };
                        if let Err(e) = result {
                            *codes.lock().unwrap().entry(e.code()).or_default() += 1;
                        }
                        check(term);
                    }
                })
            })
            .collect();
        for worker in workers {
            worker.join().unwrap();
        }
        done.store(true, Ordering::SeqCst);
    });
    if let Some(v) = violation.into_inner().unwrap() {
        return Err(v);
    }
    let mut with_ai = 0;
    let mut refined = 0;
    for term in &w.terms {
        let state = w.service.term(term).unwrap();
        ensure(ai_count(&state) <= 1, || format!("{term} ended with two AI definitions"))?;
        let added_by_ai = w
            .store
            .events_for(term)
            .unwrap()
            .iter()
            .filter(|e| e.action.kind() == ActionKind::DefinitionAdded && e.actor.is_ai())
            .count();
        ensure(added_by_ai <= 1, || format!("{term} logged {added_by_ai} AI definitions"))?;
        with_ai += added_by_ai;
        refined += usize::from(state.ai_definition().is_some_and(|d| d.version > 1));
    }
    let codes = codes.into_inner().unwrap();
    ensure(with_ai > 50 && refined > 0, || format!("too little activity: {with_ai} AI definitions, {refined} refined"))?;
    ensure(codes.contains_key("GenerationInProgress") || codes.contains_key("AiDefinitionExists"), || {
        format!("no contention observed: {codes:?}")
    })?;
    Ok(format!("terms={TERMS} ai_definitions={with_ai} refined={refined} refusals={codes:?}"))
}

// ---------------------------------------------------------------------------

fn replay_determinism() -> Check {
    let mut checked = 0;
    for seed in 0..6 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let w = random_world(&mut rng, 25, 500);
        for term in w.store.term_ids().unwrap() {
            let live = w.store.load_state(&term).unwrap();
            let replayed = replay(&w.store.events_for(&term).unwrap()).map_err(|e| e.to_string())?;
            ensure(replayed.canonical_json() == live.canonical_json(), || {
                format!("seed {seed}: {term} replays differently")
            })?;
            checked += 1;
        }
        let report = audit(w.store.as_ref()).map_err(|e| e.to_string())?;
        ensure(report.is_clean(), || format!("seed {seed}: audit {:?}", report.mismatches))?;
    }
    Ok(format!("terms={checked} mismatches=0"))
}

// ---------------------------------------------------------------------------

fn vote_tally_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let owner = ActorRef::human(&UserId::from_counter(1));
    let mut votes_cast = 0;
    for case in 0..1000 {
        let t0 = start();
        let (mut state, _) = TermState::create(TermId::from_counter(1), "t", &BTreeSet::new(), &owner, t0).unwrap();
        let defs: Vec<DefinitionId> = (0..rng.random_range(1..6u64))
            .map(|i| {
                let id = DefinitionId::from_counter(rng.random_range(1..1000) * 10 + i);
                // Few distinct timestamps so the tie-breaks get exercised.
                let at = t0 + chrono::Duration::minutes(rng.random_range(0..3));
                state.add_definition(id.clone(), "b", &owner, DefinitionKind::Human, at).unwrap();
                id
            })
            .collect();
        let mut sequence = Vec::new();
        for _ in 0..rng.random_range(0..40) {
            let user = UserId::from_counter(rng.random_range(1..8));
            let def = defs.choose(&mut rng).unwrap().clone();
            let value = if rng.random_bool(0.6) { VoteValue::Up } else { VoteValue::Down };
            state.cast_vote(&user, &def, value, t0).unwrap();
            sequence.push((user, def, value));
        }
        votes_cast += sequence.len();

        // Brute force: the last vote of each user on each definition counts.
        let mut last = BTreeMap::new();
        for (user, def, value) in &sequence {
            last.insert((def.clone(), user.clone()), *value);
        }
        for def in state.definitions.values() {
            let up = last.iter().filter(|((d, _), v)| d == &def.id && **v == VoteValue::Up).count() as u64;
            let down = last.iter().filter(|((d, _), v)| d == &def.id && **v == VoteValue::Down).count() as u64;
            ensure((def.tally.up, def.tally.down, def.tally.score) == (up, down, up as i64 - down as i64), || {
                format!("case {case}: {} tally {:?}, oracle ({up}, {down})", def.id, def.tally)
            })?;
        }

        // Brute force rank: a definition's position is the number of others
        // that beat it on (score desc, created_at asc, id asc).
        let all: Vec<_> = state.definitions.values().collect();
        let mut expected = vec![None; all.len()];
        for a in &all {
            let beats = |b: &&vocab_core::vocab::Definition| {
                (-b.tally.score, b.created_at, &b.id) < (-a.tally.score, a.created_at, &a.id)
            };
            let position = all.iter().filter(|b| beats(b)).count();
            expected[position] = Some(a.id.clone());
        }
        let got: Vec<_> = state.ranked().into_iter().map(|r| Some(r.definition.id)).collect();
        ensure(got == expected, || format!("case {case}: rank {got:?}, oracle {expected:?}"))?;
    }
    Ok(format!("sequences=1000 votes={votes_cast}"))
}

// ---------------------------------------------------------------------------

/// The documented phase table, written out independently of the library.
const DOCUMENTED: [(Phase, Phase); 7] = [
    (Phase::NoAIDefinition, Phase::AIProposed),
    (Phase::AIProposed, Phase::FeedbackPending),
    (Phase::FeedbackPending, Phase::AIProposed),
    (Phase::AIProposed, Phase::Converged),
    (Phase::AIProposed, Phase::Stalled),
    (Phase::Converged, Phase::FeedbackPending),
    (Phase::Stalled, Phase::FeedbackPending),
];

#[derive(Debug, Clone, Copy)]
enum Move {
    Generate,
    GenerateFails,
    Feedback,
    Refine,
    RefineFails,
    Upvote,
    Downvote,
    Evaluate,
    IdleThenEvaluate,
}

const MOVES: [Move; 9] = [
    Move::Generate,
    Move::GenerateFails,
    Move::Feedback,
    Move::Refine,
    Move::RefineFails,
    Move::Upvote,
    Move::Downvote,
    Move::Evaluate,
    Move::IdleThenEvaluate,
];

#[derive(Clone)]
struct Node {
    state: TermState,
    now: Timestamp,
    voters: u64,
}

fn author() -> ActorRef {
    ActorRef::human(&UserId::from_counter(1))
}

fn generation(node: &mut Node, purpose: GenerationPurpose, ok: bool) -> vocab_core::Result<Vec<vocab_core::provenance::EventDraft>> {
    let plan = match purpose {
        GenerationPurpose::Initial => node.state.plan_initial_generation()?,
        GenerationPurpose::Refinement => node.state.plan_refinement()?,
    };
    let result = if ok {
        GenerationResult::success("mock", Duration::ZERO, format!("draft {}", node.state.version))
    } else {
        GenerationResult::failure("mock", Duration::ZERO, "scripted")
    };
    let next_def = DefinitionId::from_counter(node.state.definitions.len() as u64 + 1);
    let (_, events) = node.state.complete_generation(
        &plan,
        &GenerationId::from_counter(node.state.version),
        &result,
        &author(),
        || Ok(next_def),
        node.now,
    )?;
    Ok(events)
}

fn apply(node: &mut Node, mv: Move, policy: &NegotiationPolicy) -> vocab_core::Result<Vec<vocab_core::provenance::EventDraft>> {
    node.now += chrono::Duration::minutes(1);
    let ai = node.state.ai_definition().map(|d| d.id.clone());
    match mv {
        Move::Generate => generation(node, GenerationPurpose::Initial, true),
        Move::GenerateFails => generation(node, GenerationPurpose::Initial, false),
        Move::Refine => generation(node, GenerationPurpose::Refinement, true),
        Move::RefineFails => generation(node, GenerationPurpose::Refinement, false),
        Move::Feedback => {
            let ai = ai.ok_or(Error::NoAIDefinition)?;
            let id = CommentId::from_counter(node.state.comments.len() as u64 + 1);
            let (_, e1) = node.state.add_comment(id.clone(), &ai, "feedback", &author(), Disposition::Feedback, node.now)?;
            let (_, e2) = node.state.submit_feedback(&id, &author(), node.now)?;
            Ok(vec![e1, e2])
        }
        Move::Upvote | Move::Downvote => {
            let ai = ai.ok_or(Error::NoAIDefinition)?;
            node.voters += 1;
            let value = if matches!(mv, Move::Upvote) { VoteValue::Up } else { VoteValue::Down };
            let (_, event) = node.state.cast_vote(&UserId::from_counter(100 + node.voters), &ai, value, node.now)?;
            Ok(vec![event])
        }
        Move::Evaluate | Move::IdleThenEvaluate => {
            if matches!(mv, Move::IdleThenEvaluate) {
                node.now += policy.stall_window + chrono::Duration::days(1);
            }
            let (_, event) = node.state.evaluate_convergence(node.now, policy, &author())?;
            Ok(event.into_iter().collect())
        }
    }
}

fn seed_node(phase: Phase, policy: &NegotiationPolicy) -> Node {
    let t0 = chrono::Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap();
    let (mut state, _) = TermState::create(TermId::from_counter(1), "t", &BTreeSet::new(), &author(), t0).unwrap();
    state.add_definition(DefinitionId::from_counter(1), "human", &author(), DefinitionKind::Human, t0).unwrap();
    state.add_example(vocab_core::ids::ExampleId::from_counter(1), "ex", &author(), t0).unwrap();
    let mut node = Node { state, now: t0, voters: 0 };
    let path: &[Move] = match phase {
        Phase::NoAIDefinition => &[],
        Phase::AIProposed => &[Move::Generate],
        Phase::FeedbackPending => &[Move::Generate, Move::Feedback],
        Phase::Converged => &[Move::Generate, Move::Upvote, Move::Upvote, Move::Evaluate],
        Phase::Stalled => &[Move::Generate, Move::IdleThenEvaluate],
    };
    for mv in path {
        apply(&mut node, *mv, policy).unwrap();
    }
    assert_eq!(node.state.negotiation.phase, phase);
    node
}

fn walk(node: &Node, depth: usize, policy: &NegotiationPolicy, seen: &mut BTreeSet<(Phase, Phase)>, sequences: &mut u64) -> Result<(), String> {
    *sequences += 1;
    if depth == 0 {
        return Ok(());
    }
    for mv in MOVES {
        let mut next = node.clone();
        let before = next.state.negotiation.phase;
        match apply(&mut next, mv, policy) {
            Ok(events) => {
                let after = next.state.negotiation.phase;
                for event in &events {
                    match &event.action {
                        // Another feedback while already pending only grows the queue.
                        Action::NegotiationStateChanged { from, to, pending_feedback } if from == to => {
                            ensure(*from == Phase::FeedbackPending && !pending_feedback.is_empty(), || {
                                format!("{mv:?} logged a queue update in {from:?}")
                            })?;
                        }
                        Action::NegotiationStateChanged { from, to, .. } => {
                            ensure(DOCUMENTED.contains(&(*from, *to)), || format!("{mv:?} logged {from:?} -> {to:?}"))?;
                            seen.insert((*from, *to));
                        }
                        _ => {}
                    }
                }
                if before != after {
                    ensure(DOCUMENTED.contains(&(before, after)), || format!("{mv:?} moved {before:?} -> {after:?}"))?;
                    seen.insert((before, after));
                }
                walk(&next, depth - 1, policy, seen, sequences)?;
            }
            // A refused move leaves the term as it was, so every state after
            // it is already reached by the shorter sequence without it.
            Err(_) => *sequences += 1,
        }
    }
    Ok(())
}

fn negotiation_walk() -> Check {
    let policy = NegotiationPolicy::default();
    let mut seen = BTreeSet::new();
    let mut sequences = 0;
    for phase in Phase::ALL {
        walk(&seed_node(phase, &policy), 6, &policy, &mut seen, &mut sequences)?;
    }
    let missing: Vec<_> = DOCUMENTED.iter().filter(|t| !seen.contains(t)).collect();
    ensure(missing.is_empty(), || format!("never observed {missing:?}"))?;
    Ok(format!("sequences={sequences} transitions_observed={}", seen.len()))
}

// ---------------------------------------------------------------------------

fn timeline_order() -> Check {
    let mut entries = 0;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let w = random_world(&mut rng, 15, 300);
        for term in &w.terms {
            let newest = w.service.timeline(term, TimelineOrder::NewestFirst).unwrap();
            let mut oldest = w.service.timeline(term, TimelineOrder::OldestFirst).unwrap();
            ensure(oldest.windows(2).all(|p| p[0].seq < p[1].seq), || format!("{term}: oldest_first not ascending"))?;
            oldest.reverse();
            ensure(newest == oldest, || format!("{term}: newest_first is not the reverse of oldest_first"))?;
            let events: BTreeMap<u64, _> = w.store.events_for(term).unwrap().into_iter().map(|e| (e.seq, e)).collect();
            ensure(events.len() == newest.len(), || format!("{term}: timeline length differs from log"))?;
            for entry in &newest {
                let event = &events[&entry.seq];
                ensure(entry.actor_kind == event.actor.kind && entry.actor_id == event.actor.id, || {
                    format!("{term} seq {}: actor flag {:?} vs {:?}", entry.seq, entry.actor_kind, event.actor)
                })?;
                ensure(entry.action == event.action.kind(), || format!("{term} seq {}: action differs", entry.seq))?;
            }
            entries += newest.len();
        }
    }
    Ok(format!("entries={entries}"))
}

// ---------------------------------------------------------------------------

fn export_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let w = random_world(&mut rng, 30, 600);
    let log = export_event_log(w.store.as_ref()).map_err(|e| e.to_string())?;
    let vocabulary = export_vocabulary(w.store.as_ref()).map_err(|e| e.to_string())?;
    let fresh = SqliteStore::open_migrated(&StoreConfig::default()).unwrap();
    let summary = import_event_log(&fresh, &log).map_err(|e| e.to_string())?;
    let report = audit(&fresh).map_err(|e| e.to_string())?;
    ensure(report.is_clean(), || format!("audit after import: {:?}", report.mismatches))?;
    let again = export_vocabulary(&fresh).map_err(|e| e.to_string())?;
    ensure(again.as_bytes() == vocabulary.as_bytes(), || "vocabulary export differs after round trip".into())?;
    ensure(export_event_log(&fresh).unwrap() == log, || "event log differs after round trip".into())?;
    for term in w.store.term_ids().unwrap() {
        ensure(fresh.load_state(&term).unwrap() == w.store.load_state(&term).unwrap(), || format!("{term} differs"))?;
    }
    Ok(format!("terms={} events={} bytes={}", summary.terms, summary.events, vocabulary.len()))
}

// ---------------------------------------------------------------------------

/// The documented HTTP mapping, one row per domain error.
fn documented(err: &Error) -> (u16, &'static str) {
    match err {
        Error::EmptyLabel => (422, "EmptyLabel"),
        Error::DuplicateLabel { .. } => (409, "DuplicateLabel"),
        Error::UnknownTerm(_) => (404, "UnknownTerm"),
        Error::EmptyBody => (422, "EmptyBody"),
        Error::EmptyTag => (422, "EmptyTag"),
        Error::AiDefinitionExists => (409, "AiDefinitionExists"),
        Error::UnknownDefinition(_) => (404, "UnknownDefinition"),
        Error::UnknownUser(_) => (404, "UnknownUser"),
        Error::NotAuthorized(_) => (403, "NotAuthorized"),
        Error::InvalidValue(_) => (422, "InvalidValue"),
        Error::InvalidArgument(_) => (400, "InvalidArgument"),
        Error::MalformedPayload(_) => (400, "MalformedPayload"),
        Error::CorruptHistory { .. } => (500, "CorruptHistory"),
        Error::ClockSkew { .. } => (409, "ClockSkew"),
        Error::NoExample => (422, "NoExample"),
        Error::NoAIDefinition => (409, "NoAIDefinition"),
        Error::NoPendingFeedback => (409, "NoPendingFeedback"),
        Error::GenerationInProgress => (409, "GenerationInProgress"),
        Error::BackendUnavailable { .. } => (503, "BackendUnavailable"),
        Error::ConflictRetry => (409, "ConflictRetry"),
        Error::StorageUnavailable(_) => (503, "StorageUnavailable"),
        Error::SchemaMismatch { .. } => (503, "SchemaMismatch"),
        Error::MigrationFailure { .. } => (500, "MigrationFailure"),
    }
}

fn every_error() -> Vec<Error> {
    let term = TermId::from_counter(9);
    vec![
        Error::EmptyLabel,
        Error::DuplicateLabel { label: "melt".into() },
        Error::UnknownTerm(term.clone()),
        Error::EmptyBody,
        Error::EmptyTag,
        Error::AiDefinitionExists,
        Error::UnknownDefinition(DefinitionId::from_counter(9)),
        Error::UnknownUser(UserId::from_counter(9)),
        Error::NotAuthorized("ai actors cannot vote".into()),
        Error::InvalidValue(3),
        Error::InvalidArgument("bad".into()),
        Error::MalformedPayload("line 1: eof".into()),
        Error::CorruptHistory { term_id: term, detail: "gap".into() },
        Error::ClockSkew { occurred_at: "a".into(), previous: "b".into() },
        Error::NoExample,
        Error::NoAIDefinition,
        Error::NoPendingFeedback,
        Error::GenerationInProgress,
        Error::BackendUnavailable { backend: "mock".into(), detail: "down".into() },
        Error::ConflictRetry,
        Error::StorageUnavailable("disk".into()),
        Error::SchemaMismatch { found: 1, expected: 2 },
        Error::MigrationFailure { version: 2, detail: "boom".into() },
    ]
}

struct Api {
    app: axum::Router,
}

impl Api {
    async fn send(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (u16, Value) {
        let mut request = Request::builder().method(method).uri(uri);
        if let Some(token) = token {
            request = request.header(header::AUTHORIZATION, format!("Bearer {token}"));
        }
        let request = match body {
            Some(body) => request.header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())),
            None => request.body(Body::empty()),
        }
        .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status().as_u16();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }
}

fn error_totality() -> Check {
    // Every variant must appear in the sweep list.
    let listed: BTreeSet<&str> = every_error().iter().map(|e| documented(e).1).collect();
    ensure(listed.len() == every_error().len(), || "sweep list repeats a variant".into())?;

    let store = Arc::new(FaultyStore::new(SqliteStore::open_migrated(&StoreConfig::default()).unwrap()));
    let clock = Arc::new(ManualClock::new(start()));
    let mock = MockBackend::new().unavailable_for("offline", 100).with_delay(Duration::from_millis(200));
    let config = ServiceConfig {
        retry: RetryPolicy { max_retries: 3, base_delay: Duration::ZERO },
        ..ServiceConfig::default()
    };
    let service = VocabService::new(store.clone(), clock.clone(), BackendRegistry::new(Arc::new(mock)), config);
    let auth = Authenticator::new("acceptance-session-secret", chrono::Duration::hours(8)).with_test_mode("acceptance-idp");
    let api = Api { app: router(AppState::new(Arc::new(service), auth, RateLimiter::new(0))) };

    let runtime = tokio::runtime::Builder::new_current_thread().build().unwrap();
    runtime.block_on(async {
        let mut observed: BTreeMap<&'static str, (u16, &'static str)> = BTreeMap::new();
        let (_, login) = api
            .send(Method::POST, "/auth/login", None, Some(json!({ "assertion": test_assertion("acceptance-idp", "a", "A") })))
            .await;
        let token = login["token"].as_str().unwrap().to_owned();
        let t = Some(token.as_str());
        let post = |uri: String, body: Value| {
            let api = &api;
            async move { api.send(Method::POST, &uri, t, Some(body)).await }
        };

        // Natural triggers through ordinary requests.
        let (_, melt) = post("/terms".into(), json!({ "label": "melt" })).await;
        let melt = melt["term"]["id"].as_str().unwrap().to_owned();
        let (_, def) = post(format!("/terms/{melt}/definitions"), json!({ "body": "liquefy" })).await;
        let def = def["definition"]["id"].as_str().unwrap().to_owned();
        let (_, offline) = post("/terms".into(), json!({ "label": "offline" })).await;
        let offline = offline["term"]["id"].as_str().unwrap().to_owned();
        post(format!("/terms/{offline}/examples"), json!({ "body": "e" })).await;
        let (_, slow) = post("/terms".into(), json!({ "label": "slow" })).await;
        let slow = slow["term"]["id"].as_str().unwrap().to_owned();
        post(format!("/terms/{slow}/examples"), json!({ "body": "e" })).await;

        let natural: Vec<(&'static str, Method, String, Value)> = vec![
            ("EmptyLabel", Method::POST, "/terms".into(), json!({ "label": " " })),
            ("DuplicateLabel", Method::POST, "/terms".into(), json!({ "label": "Melt" })),
            ("UnknownTerm", Method::POST, "/terms/term-999999/examples".into(), json!({ "body": "x" })),
            ("EmptyBody", Method::POST, format!("/terms/{melt}/examples"), json!({ "body": "" })),
            ("EmptyTag", Method::POST, format!("/terms/{melt}/tags"), json!({ "tag": "" })),
            ("UnknownDefinition", Method::PUT, "/definitions/def-999999/vote".into(), json!({ "value": 1 })),
            ("InvalidValue", Method::PUT, format!("/definitions/{def}/vote"), json!({ "value": 0 })),
            ("InvalidArgument", Method::POST, "/terms".into(), json!({ "label": 5 })),
            ("NoExample", Method::POST, format!("/terms/{melt}/ai-definition?wait=true"), json!({})),
            ("NoAIDefinition", Method::POST, format!("/terms/{melt}/ai-definition/refine?wait=true"), json!({})),
            ("BackendUnavailable", Method::POST, format!("/terms/{offline}/ai-definition?wait=true"), json!({})),
            ("GenerationInProgress", Method::POST, format!("/terms/{slow}/ai-definition"), json!({})),
            ("GenerationInProgress", Method::POST, format!("/terms/{slow}/ai-definition"), json!({})),
        ];
        for (expect, method, uri, body) in natural {
            let (status, reply) = api.send(method, &uri, t, Some(body)).await;
            if status < 400 {
                continue;
            }
            let code = reply["code"].as_str().unwrap_or("").to_owned();
            ensure(code == expect, || format!("{uri}: expected {expect}, got {status} {code}"))?;
            let doc = every_error().into_iter().map(|e| documented(&e)).find(|(_, c)| *c == expect).unwrap();
            ensure(status == doc.0, || format!("{expect}: status {status}, documented {}", doc.0))?;
            observed.insert(doc.1, doc);
        }
        // Let the slow background generation finish, then ask again.
        for _ in 0..100 {
            std::thread::sleep(Duration::from_millis(20));
            let (status, reply) = post(format!("/terms/{slow}/ai-definition?wait=true"), json!({})).await;
            if reply["code"] == "AiDefinitionExists" {
                observed.insert("AiDefinitionExists", (status, "AiDefinitionExists"));
                break;
            }
        }
        let (status, reply) = post(format!("/terms/{slow}/ai-definition/refine?wait=true"), json!({})).await;
        observed.insert("NoPendingFeedback", (status, if reply["code"] == "NoPendingFeedback" { "NoPendingFeedback" } else { "?" }));

        // Injected: every variant raised from the storage layer of a public read.
        for err in every_error() {
            let doc = documented(&err);
            store.arm(err.clone());
            let (status, reply) = api.send(Method::GET, &format!("/terms/{melt}"), None, None).await;
            let code = reply["code"].as_str().unwrap_or("");
            ensure((status, code) == doc, || format!("{err:?}: got ({status}, {code}), documented {doc:?}"))?;
            ensure(reply["http_status"] == status && reply["message"].as_str().is_some_and(|m| !m.is_empty()), || {
                format!("{err:?}: malformed body {reply}")
            })?;
        }
        for (code, doc) in &observed {
            let expected = every_error().into_iter().map(|e| documented(&e)).find(|(_, c)| c == code).unwrap();
            ensure(*doc == expected, || format!("{code}: natural trigger gave {doc:?}, documented {expected:?}"))?;
        }
        Ok(format!("variants={} natural_triggers={}", every_error().len(), observed.len()))
    })
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Check); 8] = [
        ("study-scenario-replication", Duration::from_secs(60), study_replication),
        ("single-ai-definition-invariant", Duration::from_secs(120), single_ai_definition),
        ("replay-determinism", Duration::from_secs(120), replay_determinism),
        ("vote-tally-oracle", Duration::from_secs(30), vote_tally_oracle),
        ("negotiation-state-machine", Duration::from_secs(30), negotiation_walk),
        ("timeline-order-contract", Duration::from_secs(10), timeline_order),
        ("export-round-trip", Duration::from_secs(30), export_round_trip),
        ("api-error-totality", Duration::from_secs(30), error_totality),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({elapsed:.2?} / {budget:?}) {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?} / {budget:?}) {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
