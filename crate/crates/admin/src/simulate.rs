//! Replays a study script through the HTTP router on a virtual clock with
//! the deterministic mock backend.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde::Serialize;
use serde_json::{json, Value};
use tower::ServiceExt;
use vocab_api::auth::test_assertion;
use vocab_api::{router, AppState, Authenticator, RateLimiter};
use vocab_core::clock::ManualClock;
use vocab_core::export::export_event_log;
use vocab_core::provenance::ActionKind;
use vocab_core::refinement::{BackendRegistry, MockBackend, RetryPolicy};
use vocab_core::store::Storage;
use vocab_core::vocab::DefinitionKind;
use vocab_core::{Error, ServiceConfig, VocabService};

use crate::error::AdminError;
use crate::scenario::{Script, Step, Target};

const IDP_SECRET: &str = "simulated-identity-provider";
const SESSION_SECRET: &str = "simulated-session-secret";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StudySummary {
    pub terms: usize,
    pub ai_definitions: usize,
    pub generation_failures: usize,
    pub comments: usize,
    pub votes: usize,
    pub terms_with_two_human_definitions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyRun {
    pub summary: StudySummary,
    /// The full provenance log, one canonical event per line.
    pub event_log: String,
}

struct Driver {
    app: Router,
    clock: Arc<ManualClock>,
    tokens: BTreeMap<String, String>,
    terms: BTreeMap<String, String>,
}

type Reply = Result<Value, String>;

impl Driver {
    async fn send(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut request = Request::builder().method(method).uri(uri);
        if let Some(token) = token {
            request = request.header(header::AUTHORIZATION, format!("Bearer {token}"));
        }
        let request = match body {
            Some(body) => request
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(body.to_string())),
            None => request.body(Body::empty()),
        }
        .map_err(|e| e.to_string())?;
        let response = self.app.clone().oneshot(request).await.map_err(|e| e.to_string())?;
        let status = response.status();
        let bytes = response.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
        let value: Value = serde_json::from_slice(&bytes).map_err(|e| format!("{status}: unreadable body: {e}"))?;
        if status.is_success() {
            Ok(value)
        } else {
            Err(format!("{status} {}: {}", value["code"].as_str().unwrap_or("?"), value["message"].as_str().unwrap_or("")))
        }
    }

    async fn post(&self, token: &str, uri: impl AsRef<str>, body: Value) -> Reply {
        self.send(Method::POST, uri.as_ref(), Some(token), Some(body)).await
    }

    fn term(&self, label: &str) -> Result<&str, String> {
        self.terms
            .get(label)
            .map(String::as_str)
            .ok_or_else(|| format!("no term labelled {label:?} has been created"))
    }

    async fn definition(&self, label: &str, target: Target) -> Result<String, String> {
        let term = self.term(label)?;
        let page = self.send(Method::GET, &format!("/terms/{term}"), None, None).await?;
        let mut defs: Vec<&Value> = page["definitions"].as_array().into_iter().flatten().collect();
        defs.sort_by_key(|d| d["id"].as_str().unwrap_or_default().to_owned());
        let found = match target {
            Target::Ai => defs.into_iter().find(|d| d["kind"] == "ai"),
            Target::Human(n) => defs.into_iter().filter(|d| d["kind"] == "human").nth(n - 1),
        };
        found
            .and_then(|d| d["id"].as_str())
            .map(str::to_owned)
            .ok_or_else(|| format!("{label:?} has no {target:?} definition"))
    }

    async fn step(&mut self, token: &str, step: &Step) -> Result<(), String> {
        match step {
            Step::CreateTerm { term, tags } => {
                let reply = self.post(token, "/terms", json!({ "label": term, "tags": tags })).await?;
                let id = reply["term"]["id"].as_str().ok_or("reply has no term id")?.to_owned();
                self.terms.insert(term.clone(), id);
            }
            Step::Define { term, body } => {
                self.post(token, format!("/terms/{}/definitions", self.term(term)?), json!({ "body": body })).await?;
            }
            Step::Example { term, body } => {
                self.post(token, format!("/terms/{}/examples", self.term(term)?), json!({ "body": body })).await?;
            }
            Step::Tag { term, tag } => {
                self.post(token, format!("/terms/{}/tags", self.term(term)?), json!({ "tag": tag })).await?;
            }
            Step::Generate { term } => {
                self.post(token, format!("/terms/{}/ai-definition?wait=true", self.term(term)?), json!({})).await?;
            }
            Step::Refine { term } => {
                self.post(token, format!("/terms/{}/ai-definition/refine?wait=true", self.term(term)?), json!({})).await?;
            }
            Step::Evaluate { term } => {
                self.post(token, format!("/terms/{}/ai-definition/evaluate", self.term(term)?), json!({})).await?;
            }
            Step::Comment { term, on, body, feedback } => {
                let def = self.definition(term, *on).await?;
                let disposition = if *feedback { "feedback" } else { "discussion" };
                self.post(token, format!("/definitions/{def}/comments"), json!({ "body": body, "disposition": disposition })).await?;
            }
            Step::Vote { term, on, value } => {
                let def = self.definition(term, *on).await?;
                self.send(Method::PUT, &format!("/definitions/{def}/vote"), Some(token), Some(json!({ "value": value })))
                    .await?;
            }
        }
        Ok(())
    }
}

fn summarize(store: &dyn Storage) -> Result<StudySummary, Error> {
    let mut summary = StudySummary {
        terms: 0,
        ai_definitions: 0,
        generation_failures: 0,
        comments: 0,
        votes: 0,
        terms_with_two_human_definitions: 0,
    };
    for id in store.term_ids()? {
        let state = store.load_state(&id)?;
        summary.terms += 1;
        summary.ai_definitions += usize::from(state.ai_definition().is_some());
        let humans = state.definitions.values().filter(|d| d.kind == DefinitionKind::Human).count();
        summary.terms_with_two_human_definitions += usize::from(humans >= 2);
    }
    for event in store.all_events()? {
        match event.action.kind() {
            ActionKind::AIGenerationFailed => summary.generation_failures += 1,
            ActionKind::CommentAdded => summary.comments += 1,
            ActionKind::VoteCast => summary.votes += 1,
            _ => {}
        }
    }
    Ok(summary)
}

/// Run `script` against an empty, migrated store.
pub fn simulate_study(script: &Script, store: Arc<dyn Storage>) -> Result<StudyRun, AdminError> {
    if !store.is_empty()? {
        return Err(Error::InvalidArgument("simulate-study needs an empty store".into()).into());
    }
    let clock = Arc::new(ManualClock::new(script.start));
    let backend = Arc::new(MockBackend::new().failing_on(script.failures.iter().cloned()));
    let config = ServiceConfig {
        retry: RetryPolicy {
            base_delay: Duration::ZERO,
            ..RetryPolicy::default()
        },
        ..ServiceConfig::default()
    };
    let service = VocabService::new(store.clone(), clock.clone(), BackendRegistry::new(backend), config);
    // Scripts span weeks of virtual time; sessions must outlive them.
    let auth = Authenticator::new(SESSION_SECRET, chrono::Duration::days(3650)).with_test_mode(IDP_SECRET);
    let state = AppState::new(Arc::new(service), auth, RateLimiter::new(0));

    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .map_err(|e| Error::StorageUnavailable(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let mut driver = Driver {
            app: router(state),
            clock,
            tokens: BTreeMap::new(),
            terms: BTreeMap::new(),
        };
        for user in &script.users {
            let name = user.display_name.as_deref().unwrap_or(&user.name);
            let assertion = test_assertion(IDP_SECRET, &user.name, name);
            let reply = driver
                .send(Method::POST, "/auth/login", None, Some(json!({ "assertion": assertion })))
                .await
                .map_err(|message| AdminError::Script { index: 0, message: format!("login {}: {message}", user.name) })?;
            let token = reply["token"].as_str().unwrap_or_default().to_owned();
            driver.tokens.insert(user.name.clone(), token);
        }
        for (index, action) in script.actions.iter().enumerate() {
            driver.clock.set(action.at);
            let token = driver.tokens[&action.user].clone();
            driver
                .step(&token, &action.step)
                .await
                .map_err(|message| AdminError::Script { index: index + 1, message })?;
        }
        Ok::<_, AdminError>(())
    })?;
    Ok(StudyRun {
        summary: summarize(store.as_ref())?,
        event_log: export_event_log(store.as_ref())?,
    })
}
