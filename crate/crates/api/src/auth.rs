//! Identity assertions in, session tokens out.
//!
//! Two identity providers are supported: an OIDC provider whose signing keys
//! are read from a JWKS file, and a test-mode provider that accepts HS256
//! assertions signed with a shared secret. Sessions are HS256 tokens signed
//! with the service secret. Expiry is checked against the service clock
//! rather than the wall clock so simulations with a virtual clock work.

use std::collections::HashSet;

use chrono::{DateTime, Duration, Utc};
use jsonwebtoken::jwk::JwkSet;
use jsonwebtoken::{decode, decode_header, encode, Algorithm, DecodingKey, EncodingKey, Header, Validation};
use serde::{Deserialize, Serialize};
use vocab_core::clock::Timestamp;
use vocab_core::ids::UserId;

use crate::config::{AuthConfig, ConfigError};
use crate::error::ApiError;

pub const TEST_MODE_ISSUER: &str = "vocab-test-mode";
const SESSION_TYPE: &str = "session";
/// Slack allowed on assertion `exp`/`iat` checks.
const LEEWAY_SECS: i64 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionClaims {
    pub sub: String,
    pub iat: i64,
    pub exp: i64,
    pub typ: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionClaims {
    pub sub: String,
    pub iss: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iat: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub subject: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
}

struct Oidc {
    issuer: String,
    client_id: String,
    keys: JwkSet,
}

pub struct Authenticator {
    encoding: EncodingKey,
    decoding: DecodingKey,
    ttl: Duration,
    test_mode: Option<DecodingKey>,
    oidc: Option<Oidc>,
}

impl std::fmt::Debug for Authenticator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Authenticator")
            .field("ttl", &self.ttl)
            .field("test_mode", &self.test_mode.is_some())
            .field("oidc", &self.oidc.as_ref().map(|o| &o.issuer))
            .finish()
    }
}

/// Sign an assertion the test-mode provider accepts.
pub fn test_assertion(secret: &str, subject: &str, name: &str) -> String {
    let claims = AssertionClaims {
        sub: subject.to_owned(),
        iss: TEST_MODE_ISSUER.to_owned(),
        name: Some(name.to_owned()),
        exp: None,
        iat: None,
    };
    encode(&Header::new(Algorithm::HS256), &claims, &EncodingKey::from_secret(secret.as_bytes()))
        .expect("HS256 signing cannot fail")
}

fn lenient(alg: Algorithm) -> Validation {
    let mut validation = Validation::new(alg);
    validation.validate_exp = false;
    validation.validate_aud = false;
    validation.required_spec_claims = HashSet::new();
    validation
}

fn check_window(claims: &AssertionClaims, now: Timestamp) -> Result<(), ApiError> {
    let now = now.timestamp();
    if matches!(claims.exp, Some(exp) if exp + LEEWAY_SECS < now) {
        return Err(ApiError::invalid_assertion("assertion expired"));
    }
    if matches!(claims.iat, Some(iat) if iat - LEEWAY_SECS > now) {
        return Err(ApiError::invalid_assertion("assertion issued in the future"));
    }
    Ok(())
}

impl Authenticator {
    pub fn new(session_secret: &str, ttl: Duration) -> Self {
        Self {
            encoding: EncodingKey::from_secret(session_secret.as_bytes()),
            decoding: DecodingKey::from_secret(session_secret.as_bytes()),
            ttl,
            test_mode: None,
            oidc: None,
        }
    }

    pub fn with_test_mode(mut self, secret: &str) -> Self {
        self.test_mode = Some(DecodingKey::from_secret(secret.as_bytes()));
        self
    }

    pub fn with_oidc(mut self, issuer: &str, client_id: &str, keys: JwkSet) -> Self {
        self.oidc = Some(Oidc {
            issuer: issuer.to_owned(),
            client_id: client_id.to_owned(),
            keys,
        });
        self
    }

    pub fn from_config(config: &AuthConfig) -> Result<Self, ConfigError> {
        let mut auth = Self::new(&config.session_secret, Duration::seconds(config.session_ttl_secs));
        if let Some(secret) = &config.test_mode_secret {
            auth = auth.with_test_mode(secret);
        }
        if let Some(oidc) = &config.oidc {
            let text = std::fs::read_to_string(&oidc.jwks_path).map_err(|source| ConfigError::Read {
                path: oidc.jwks_path.clone(),
                source,
            })?;
            let keys: JwkSet = serde_json::from_str(&text)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", oidc.jwks_path.display())))?;
            auth = auth.with_oidc(&oidc.issuer, &oidc.client_id, keys);
        }
        Ok(auth)
    }

    /// Validate an identity provider's assertion.
    pub fn verify_assertion(&self, assertion: &str, now: Timestamp) -> Result<Identity, ApiError> {
        let header = decode_header(assertion).map_err(|e| ApiError::invalid_assertion(format!("unreadable assertion: {e}")))?;
        let claims = match header.alg {
            Algorithm::HS256 => {
                let key = self
                    .test_mode
                    .as_ref()
                    .ok_or_else(|| ApiError::invalid_assertion("test-mode identities are disabled"))?;
                let mut validation = lenient(Algorithm::HS256);
                validation.set_issuer(&[TEST_MODE_ISSUER]);
                decode::<AssertionClaims>(assertion, key, &validation)
            }
            alg => {
                let oidc = self
                    .oidc
                    .as_ref()
                    .ok_or_else(|| ApiError::invalid_assertion("no identity provider accepts this assertion"))?;
                let jwk = match &header.kid {
                    Some(kid) => oidc.keys.find(kid),
                    None => oidc.keys.keys.first(),
                }
                .ok_or_else(|| ApiError::invalid_assertion("unknown signing key"))?;
                let key = DecodingKey::from_jwk(jwk).map_err(|e| ApiError::invalid_assertion(format!("bad provider key: {e}")))?;
                let mut validation = lenient(alg);
                validation.validate_aud = true;
                validation.set_audience(&[&oidc.client_id]);
                validation.set_issuer(&[&oidc.issuer]);
                decode::<AssertionClaims>(assertion, &key, &validation)
            }
        }
        .map_err(|e| ApiError::invalid_assertion(format!("assertion rejected: {e}")))?
        .claims;
        check_window(&claims, now)?;
        if claims.sub.trim().is_empty() {
            return Err(ApiError::invalid_assertion("assertion has no subject"));
        }
        let subject = format!("{}|{}", claims.iss, claims.sub);
        Ok(Identity {
            display_name: claims.name.unwrap_or_else(|| claims.sub.clone()),
            subject,
        })
    }

    pub fn issue_session(&self, user: &UserId, now: Timestamp) -> SessionToken {
        let expires_at = now + self.ttl;
        let claims = SessionClaims {
            sub: user.to_string(),
            iat: now.timestamp(),
            exp: expires_at.timestamp(),
            typ: SESSION_TYPE.to_owned(),
        };
        SessionToken {
            token: encode(&Header::new(Algorithm::HS256), &claims, &self.encoding).expect("HS256 signing cannot fail"),
            issued_at: now,
            expires_at,
        }
    }

    pub fn verify_session(&self, token: &str, now: Timestamp) -> Result<UserId, ApiError> {
        let claims = decode::<SessionClaims>(token, &self.decoding, &lenient(Algorithm::HS256))
            .map_err(|e| ApiError::unauthenticated(format!("invalid session token: {e}")))?
            .claims;
        if claims.typ != SESSION_TYPE {
            return Err(ApiError::unauthenticated("not a session token"));
        }
        let expires = DateTime::<Utc>::from_timestamp(claims.exp, 0)
            .ok_or_else(|| ApiError::unauthenticated("invalid session expiry"))?;
        if now >= expires {
            return Err(ApiError::unauthenticated("session expired"));
        }
        Ok(UserId::new(claims.sub))
    }
}
