#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use vocab_api::auth::test_assertion;
use vocab_api::{router, AppState, Authenticator, RateLimiter};
use vocab_core::clock::{ManualClock, Timestamp};
use vocab_core::refinement::{BackendRegistry, MockBackend, RetryPolicy};
use vocab_core::store::{SqliteStore, StoreConfig};
use vocab_core::{ServiceConfig, VocabService};

pub const SESSION_SECRET: &str = "api-test-session-secret";
pub const IDP_SECRET: &str = "api-test-idp-secret";

pub fn start() -> Timestamp {
    Utc.with_ymd_and_hms(2025, 3, 3, 9, 0, 0).unwrap()
}

pub struct Harness {
    pub app: Router,
    pub state: AppState,
    pub store: Arc<SqliteStore>,
    pub clock: Arc<ManualClock>,
    pub mock: Arc<MockBackend>,
}

pub fn authenticator() -> Authenticator {
    Authenticator::new(SESSION_SECRET, chrono::Duration::hours(8)).with_test_mode(IDP_SECRET)
}

pub fn harness() -> Harness {
    harness_with(MockBackend::new(), authenticator(), 0)
}

pub fn harness_with(mock: MockBackend, auth: Authenticator, per_minute: u32) -> Harness {
    let store = Arc::new(SqliteStore::open_migrated(&StoreConfig::default()).unwrap());
    let clock = Arc::new(ManualClock::new(start()));
    let mock = Arc::new(mock);
    let config = ServiceConfig {
        retry: RetryPolicy {
            max_retries: 3,
            base_delay: Duration::ZERO,
        },
        ..ServiceConfig::default()
    };
    let service = VocabService::new(store.clone(), clock.clone(), BackendRegistry::new(mock.clone()), config);
    let state = AppState::new(Arc::new(service), auth, RateLimiter::new(per_minute));
    Harness {
        app: router(state.clone()),
        state,
        store,
        clock,
        mock,
    }
}

impl Harness {
    pub async fn send(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
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
        .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Method::GET, uri, None, None).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.send(Method::POST, uri, Some(token), Some(body)).await
    }

    pub async fn put(&self, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.send(Method::PUT, uri, Some(token), Some(body)).await
    }

    /// Log in through the test-mode identity provider and return the token.
    pub async fn login(&self, name: &str) -> String {
        let assertion = test_assertion(IDP_SECRET, name, name);
        let (status, body) = self
            .send(Method::POST, "/auth/login", None, Some(serde_json::json!({ "assertion": assertion })))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_owned()
    }

    pub async fn term(&self, token: &str, label: &str) -> String {
        let (status, body) = self.post("/terms", token, serde_json::json!({ "label": label })).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["term"]["id"].as_str().unwrap().to_owned()
    }

    /// A term with one human definition and one example; returns (term, definition).
    pub async fn ready_term(&self, token: &str, label: &str) -> (String, String) {
        let term = self.term(token, label).await;
        let (status, body) = self
            .post(&format!("/terms/{term}/definitions"), token, serde_json::json!({ "body": format!("{label} defined") }))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let def = body["definition"]["id"].as_str().unwrap().to_owned();
        let (status, body) = self
            .post(&format!("/terms/{term}/examples"), token, serde_json::json!({ "body": format!("a {label} example") }))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        (term, def)
    }

    pub fn tick(&self, minutes: i64) {
        self.clock.advance(chrono::Duration::minutes(minutes));
    }
}
