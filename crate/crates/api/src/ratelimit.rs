use std::collections::HashMap;
use std::sync::Mutex;

use axum::http::StatusCode;
use serde_json::json;
use vocab_core::clock::Timestamp;
use vocab_core::ids::UserId;

use crate::error::ApiError;

/// Fixed one-minute windows of writes per user.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: u32,
    windows: Mutex<HashMap<UserId, (i64, u32)>>,
}

impl RateLimiter {
    /// `per_minute == 0` disables limiting.
    pub fn new(per_minute: u32) -> Self {
        Self {
            per_minute,
            windows: Mutex::default(),
        }
    }

    pub fn check(&self, user: &UserId, now: Timestamp) -> Result<(), ApiError> {
        if self.per_minute == 0 {
            return Ok(());
        }
        let minute = now.timestamp().div_euclid(60);
        let mut windows = self.windows.lock().expect("rate limiter poisoned");
        let entry = windows.entry(user.clone()).or_insert((minute, 0));
        if entry.0 != minute {
            *entry = (minute, 0);
        }
        if entry.1 >= self.per_minute {
            let retry_after = 60 - now.timestamp().rem_euclid(60);
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                "RateLimited",
                format!("more than {} writes per minute", self.per_minute),
            )
            .with_details(json!({ "retry_after_secs": retry_after })));
        }
        entry.1 += 1;
        Ok(())
    }
}
