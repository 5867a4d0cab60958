//! HTTP plumbing shared by the embedding and chat clients: a JSON POST
//! transport, bounded exponential backoff with jitter, and a global
//! request-rate limiter.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;
use thiserror::Error;

/// Status and body of a completed HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Failure to get any HTTP reply (connection, DNS, timeout, ...).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// Anything that can POST a JSON body and hand back the raw reply.
pub trait JsonTransport: Send + Sync {
    fn post(&self, body: &Value) -> Result<HttpReply, TransportError>;
}

/// POSTs JSON to a fixed URL, with an optional bearer token read from an
/// environment variable at request time.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    auth_env: Option<String>,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, auth_env: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            url: url.into(),
            auth_env,
        }
    }
}

impl JsonTransport for HttpTransport {
    fn post(&self, body: &Value) -> Result<HttpReply, TransportError> {
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(var) = &self.auth_env {
            let key = std::env::var(var)
                .map_err(|_| TransportError(format!("environment variable {var} is not set")))?;
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let payload = serde_json::to_vec(body).map_err(|e| TransportError(e.to_string()))?;
        let mut response = request
            .send(&payload[..])
            .map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// Exponential backoff: attempt `k` (0-based) waits
/// `min(base · 2^k, max) · (1 + U[0, jitter))` before the next try.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
            jitter: 0.5,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and stubs.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: 0.0,
        }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << attempt.min(20));
        let capped = exp.min(self.max_delay);
        if self.jitter > 0.0 && !capped.is_zero() {
            capped.mul_f64(1.0 + rand::rng().random_range(0.0..self.jitter))
        } else {
            capped
        }
    }
}

/// 429 and 5xx are worth retrying; other statuses are final.
pub fn is_retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Spaces requests at least `1 / rate` seconds apart across all callers.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    /// `rate` is in requests per second; non-positive or infinite means no limit.
    pub fn new(rate: f64) -> Self {
        let interval = if rate.is_finite() && rate > 0.0 {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequestError {
    #[error("provider returned status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// POSTs `body` until a 2xx reply, a non-retryable status, or the attempt
/// budget runs out. Each retry increments `retries`.
pub fn post_with_retry(
    transport: &dyn JsonTransport,
    body: &Value,
    policy: &RetryPolicy,
    limiter: &RateLimiter,
    retries: &AtomicU64,
) -> Result<HttpReply, RequestError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            retries.fetch_add(1, Ordering::Relaxed);
            std::thread::sleep(policy.delay(attempt - 1));
        }
        limiter.acquire();
        match transport.post(body) {
            Ok(reply) if (200..300).contains(&reply.status) => return Ok(reply),
            Ok(reply) if is_retryable(reply.status) => {
                log::warn!("retryable status {} (attempt {}/{attempts})", reply.status, attempt + 1);
                last = Some(RequestError::Provider {
                    status: reply.status,
                    body: reply.body,
                });
            }
            Ok(reply) => {
                return Err(RequestError::Provider {
                    status: reply.status,
                    body: reply.body,
                })
            }
            Err(e) => {
                log::warn!("{e} (attempt {}/{attempts})", attempt + 1);
                last = Some(RequestError::Transport(e));
            }
        }
    }
    Err(last.expect("at least one attempt was made"))
}
