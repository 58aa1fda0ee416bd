use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put, MethodRouter};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use vocab_core::ids::{DefinitionId, GenerationId, TermId, UserId};
use vocab_core::provenance::{GenerationPurpose, TimelineOrder};
use vocab_core::refinement::GenerationOutcome;
use vocab_core::service::{Committed, GenerationTicket};
use vocab_core::store::LATEST_SCHEMA_VERSION;
use vocab_core::vocab::{
    ActorRef, Comment, Definition, DefinitionKind, Disposition, Example, NegotiationState, Term, TermState,
};
use vocab_core::VocabService;

use crate::auth::Authenticator;
use crate::error::ApiError;
use crate::ratelimit::RateLimiter;

pub const DEFAULT_SEARCH_LIMIT: usize = 20;
pub const DEFAULT_PAGE_SIZE: usize = 50;

struct Inner {
    service: Arc<VocabService>,
    auth: Authenticator,
    limiter: RateLimiter,
    generations: Mutex<HashMap<GenerationId, GenerationStatus>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(service: Arc<VocabService>, auth: Authenticator, limiter: RateLimiter) -> Self {
        Self(Arc::new(Inner {
            service,
            auth,
            limiter,
            generations: Mutex::default(),
        }))
    }

    pub fn service(&self) -> &Arc<VocabService> {
        &self.0.service
    }

    fn record(&self, status: GenerationStatus) {
        self.0
            .generations
            .lock()
            .expect("generation table poisoned")
            .insert(status.generation_id.clone(), status);
    }
}

/// Run a blocking service call off the async executor.
async fn call<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&VocabService) -> vocab_core::Result<T> + Send + 'static,
{
    let service = state.0.service.clone();
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

/// JSON body whose rejections use the API error format.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|r| ApiError::bad_request(r.body_text()))
    }
}

/// Query string whose rejections use the API error format.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Params(v))
            .map_err(|r| ApiError::bad_request(r.body_text()))
    }
}

/// An authenticated caller.
pub struct Session(pub UserId);

impl Session {
    fn actor(&self) -> ActorRef {
        ActorRef::human(&self.0)
    }
}

impl FromRequestParts<AppState> for Session {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(|| ApiError::unauthenticated("missing bearer token"))?;
        let user = state.0.auth.verify_session(token.trim(), state.0.service.now())?;
        let known = user.clone();
        call(state, move |s| s.user(&known)).await.map_err(|e| {
            if e.code == "UnknownUser" {
                ApiError::unauthenticated("session refers to an unknown user")
            } else {
                e
            }
        })?;
        Ok(Session(user))
    }
}

/// An authenticated caller who is allowed another write this minute.
pub struct Writer(pub Session);

impl FromRequestParts<AppState> for Writer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let session = Session::from_request_parts(parts, state).await?;
        state.0.limiter.check(&session.0, state.0.service.now())?;
        Ok(Writer(session))
    }
}

type ApiResult = Result<Response, ApiError>;

fn respond(status: StatusCode, body: serde_json::Value) -> ApiResult {
    Ok((status, Json(body)).into_response())
}

fn last_seq<T>(committed: &Committed<T>) -> Option<u64> {
    committed.last_seq()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginRequest {
    assertion: String,
}

async fn login(State(state): State<AppState>, Body(req): Body<LoginRequest>) -> ApiResult {
    let identity = state.0.auth.verify_assertion(&req.assertion, state.0.service.now())?;
    let user = call(&state, move |s| s.login(&identity.subject, &identity.display_name)).await?;
    let session = state.0.auth.issue_session(&user.id, state.0.service.now());
    respond(
        StatusCode::OK,
        json!({
            "token": session.token,
            "issued_at": session.issued_at,
            "expires_at": session.expires_at,
            "user": user,
        }),
    )
}

async fn healthz(State(state): State<AppState>) -> ApiResult {
    let version = call(&state, |s| s.store().schema_version()).await?;
    let status = if version == LATEST_SCHEMA_VERSION {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    respond(status, json!({ "status": if status.is_success() { "ok" } else { "schema_mismatch" }, "schema_version": version }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectoryQuery {
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn list_terms(State(state): State<AppState>, Params(q): Params<DirectoryQuery>) -> ApiResult {
    let page = q.page.unwrap_or(0);
    let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    let terms = call(&state, move |s| s.directory(page, page_size)).await?;
    respond(
        StatusCode::OK,
        json!({ "page": page, "page_size": page_size, "terms": terms }),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateTerm {
    label: String,
    #[serde(default)]
    tags: BTreeSet<String>,
}

async fn create_term(State(state): State<AppState>, Writer(who): Writer, Body(req): Body<CreateTerm>) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| s.create_term(&req.label, &req.tags, &actor)).await?;
    respond(StatusCode::CREATED, json!({ "term": done.value, "seq": last_seq(&done) }))
}

/// The term page: everything attached to a term, definitions in rank order.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TermView {
    pub term: Term,
    pub definitions: Vec<Definition>,
    pub examples: Vec<Example>,
    pub comments: Vec<Comment>,
    pub negotiation: NegotiationState,
    pub version: u64,
}

impl From<TermState> for TermView {
    fn from(state: TermState) -> Self {
        Self {
            definitions: state.ranked().into_iter().map(|r| r.definition).collect(),
            examples: state.examples.into_values().collect(),
            comments: state.comments.into_values().collect(),
            term: state.term,
            negotiation: state.negotiation,
            version: state.version,
        }
    }
}

async fn get_term(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let term = call(&state, move |s| s.term(&TermId::new(id))).await?;
    respond(StatusCode::OK, json!(TermView::from(term)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TagRequest {
    tag: String,
}

async fn tag_term(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Body(req): Body<TagRequest>,
) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| s.tag_term(&TermId::new(id), &req.tag, &actor)).await?;
    respond(StatusCode::OK, json!({ "term": done.value, "seq": last_seq(&done) }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextRequest {
    body: String,
}

async fn add_definition(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Body(req): Body<TextRequest>,
) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| {
        s.add_definition(&TermId::new(id), &req.body, &actor, DefinitionKind::Human)
    })
    .await?;
    respond(StatusCode::CREATED, json!({ "definition": done.value, "seq": last_seq(&done) }))
}

async fn revise_definition(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Body(req): Body<TextRequest>,
) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| s.revise_definition(&DefinitionId::new(id), &req.body, &actor)).await?;
    respond(StatusCode::OK, json!({ "definition": done.value, "seq": last_seq(&done) }))
}

async fn add_example(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Body(req): Body<TextRequest>,
) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| s.add_example(&TermId::new(id), &req.body, &actor)).await?;
    respond(StatusCode::CREATED, json!({ "example": done.value, "seq": last_seq(&done) }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentRequest {
    body: String,
    #[serde(default = "discussion")]
    disposition: Disposition,
}

fn discussion() -> Disposition {
    Disposition::Discussion
}

async fn add_comment(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Body(req): Body<CommentRequest>,
) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| {
        s.add_comment(&DefinitionId::new(id), &req.body, &actor, req.disposition)
    })
    .await?;
    respond(
        StatusCode::CREATED,
        json!({
            "comment": done.value.comment,
            "negotiation": done.value.negotiation,
            "seq": last_seq(&done),
        }),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VoteRequest {
    value: i64,
}

async fn vote(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Body(req): Body<VoteRequest>,
) -> ApiResult {
    let definition = DefinitionId::new(id);
    let target = definition.clone();
    let user = who.0;
    let done = call(&state, move |s| s.cast_vote(&user, &target, req.value)).await?;
    respond(
        StatusCode::OK,
        json!({ "definition_id": definition, "tally": done.value, "seq": last_seq(&done) }),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationState {
    Pending,
    Succeeded,
    Failed,
    Unavailable,
    Error,
}

/// Progress of one generation request, as returned by the trigger and
/// polling endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStatus {
    pub generation_id: GenerationId,
    pub term_id: TermId,
    pub purpose: GenerationPurpose,
    pub status: GenerationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<Definition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

impl GenerationStatus {
    fn pending(ticket: &GenerationTicket) -> Self {
        Self {
            generation_id: ticket.generation_id.clone(),
            term_id: ticket.term_id.clone(),
            purpose: ticket.purpose,
            status: GenerationState::Pending,
            definition: None,
            reason: None,
            error: None,
            seq: None,
        }
    }

    fn finish(mut self, result: &Result<Committed<GenerationOutcome>, ApiError>) -> Self {
        match result {
            Ok(done) => {
                self.seq = done.last_seq();
                match &done.value {
                    GenerationOutcome::Created(def) | GenerationOutcome::Revised(def) => {
                        self.status = GenerationState::Succeeded;
                        self.definition = Some(def.clone());
                    }
                    GenerationOutcome::Failed { reason } => {
                        self.status = GenerationState::Failed;
                        self.reason = Some(reason.clone());
                    }
                }
            }
            Err(err) => {
                self.status = if err.code == "BackendUnavailable" {
                    GenerationState::Unavailable
                } else {
                    GenerationState::Error
                };
                self.error = Some(err.clone());
            }
        }
        self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerQuery {
    #[serde(default)]
    wait: bool,
}

async fn trigger(state: AppState, who: Session, id: String, wait: bool, purpose: GenerationPurpose) -> ApiResult {
    let actor = who.actor();
    let ticket = call(&state, move |s| s.start_generation(&TermId::new(id), purpose, &actor)).await?;
    let pending = GenerationStatus::pending(&ticket);
    state.record(pending.clone());
    let accepted = pending.clone();
    let run = {
        let state = state.clone();
        async move {
            let result = call(&state, move |s| s.run_generation(ticket)).await;
            let status = pending.finish(&result);
            state.record(status.clone());
            (status, result)
        }
    };
    if wait {
        let (status, result) = run.await;
        result?;
        respond(StatusCode::OK, json!(status))
    } else {
        tokio::spawn(run);
        let mut body = json!(accepted);
        body["poll_url"] = json!(format!("/generations/{}", accepted.generation_id));
        respond(StatusCode::ACCEPTED, body)
    }
}

async fn generate(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Params(q): Params<TriggerQuery>,
) -> ApiResult {
    trigger(state, who, id, q.wait, GenerationPurpose::Initial).await
}

async fn refine(
    State(state): State<AppState>,
    Writer(who): Writer,
    Path(id): Path<String>,
    Params(q): Params<TriggerQuery>,
) -> ApiResult {
    trigger(state, who, id, q.wait, GenerationPurpose::Refinement).await
}

async fn evaluate(State(state): State<AppState>, Writer(who): Writer, Path(id): Path<String>) -> ApiResult {
    let actor = who.actor();
    let done = call(&state, move |s| s.evaluate_convergence(&TermId::new(id), &actor)).await?;
    respond(StatusCode::OK, json!({ "negotiation": done.value, "seq": last_seq(&done) }))
}

async fn generation_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let status = state
        .0
        .generations
        .lock()
        .expect("generation table poisoned")
        .get(&GenerationId::new(id.clone()))
        .cloned()
        .ok_or_else(|| ApiError::not_found("UnknownGeneration", format!("unknown generation {id}")))?;
    respond(StatusCode::OK, json!(status))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvenanceQuery {
    order: Option<String>,
}

async fn provenance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Params(q): Params<ProvenanceQuery>,
) -> ApiResult {
    let order: TimelineOrder = match q.order.as_deref() {
        None => TimelineOrder::default(),
        Some(raw) => raw.parse().map_err(ApiError::bad_request)?,
    };
    let term = TermId::new(id);
    let term_id = term.clone();
    let entries = call(&state, move |s| s.timeline(&term, order)).await?;
    respond(
        StatusCode::OK,
        json!({ "term_id": term_id, "order": order, "entries": entries }),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    limit: Option<usize>,
}

async fn search(State(state): State<AppState>, Params(req): Params<SearchQuery>) -> ApiResult {
    let limit = req.limit.unwrap_or(DEFAULT_SEARCH_LIMIT);
    let query = req.q.clone();
    let hits = call(&state, move |s| s.search(&query, limit)).await?;
    respond(StatusCode::OK, json!({ "query": req.q, "limit": limit, "hits": hits }))
}

async fn not_found() -> ApiError {
    ApiError::not_found("NotFound", "no such route")
}

/// One registered route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSpec {
    pub method: Method,
    pub path: &'static str,
    pub requires_session: bool,
}

fn table() -> Vec<(RouteSpec, MethodRouter<AppState>)> {
    fn spec(method: Method, path: &'static str, requires_session: bool) -> RouteSpec {
        RouteSpec {
            method,
            path,
            requires_session,
        }
    }
    vec![
        (spec(Method::POST, "/auth/login", false), post(login)),
        (spec(Method::GET, "/healthz", false), get(healthz)),
        (spec(Method::GET, "/terms", false), get(list_terms)),
        (spec(Method::POST, "/terms", true), post(create_term)),
        (spec(Method::GET, "/terms/{id}", false), get(get_term)),
        (spec(Method::POST, "/terms/{id}/tags", true), post(tag_term)),
        (spec(Method::POST, "/terms/{id}/definitions", true), post(add_definition)),
        (spec(Method::POST, "/terms/{id}/examples", true), post(add_example)),
        (spec(Method::PUT, "/definitions/{id}", true), put(revise_definition)),
        (spec(Method::POST, "/definitions/{id}/comments", true), post(add_comment)),
        (spec(Method::PUT, "/definitions/{id}/vote", true), put(vote)),
        (spec(Method::POST, "/terms/{id}/ai-definition", true), post(generate)),
        (spec(Method::POST, "/terms/{id}/ai-definition/refine", true), post(refine)),
        (spec(Method::POST, "/terms/{id}/ai-definition/evaluate", true), post(evaluate)),
        (spec(Method::GET, "/generations/{id}", false), get(generation_status)),
        (spec(Method::GET, "/terms/{id}/provenance", false), get(provenance)),
        (spec(Method::GET, "/search", false), get(search)),
    ]
}

/// Every route the router serves.
pub fn route_specs() -> Vec<RouteSpec> {
    table().into_iter().map(|(spec, _)| spec).collect()
}

pub fn router(state: AppState) -> Router {
    let mut by_path: Vec<(&'static str, MethodRouter<AppState>)> = Vec::new();
    for (spec, handler) in table() {
        match by_path.iter_mut().find(|(path, _)| *path == spec.path) {
            Some((_, existing)) => *existing = std::mem::take(existing).merge(handler),
            None => by_path.push((spec.path, handler)),
        }
    }
    by_path
        .into_iter()
        .fold(Router::new(), |router, (path, handler)| router.route(path, handler))
        .fallback(not_found)
        .with_state(state)
}
