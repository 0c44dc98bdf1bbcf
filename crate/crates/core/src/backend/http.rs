//! Blocking client for the `/v1/logits` scoring endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;

use super::{BackendError, LogitQuery, LogitSource};

/// Environment variable consulted when no URL is configured.
pub const BACKEND_URL_ENV: &str = "ENTRAIN_BACKEND_URL";
pub const LOGITS_PATH: &str = "/v1/logits";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

#[derive(Deserialize)]
struct LogitResponse {
    logits: Vec<f64>,
}

pub struct HttpBackend {
    client: Client,
    url: String,
    bearer_token: Option<String>,
    retry: RetryPolicy,
    sent: AtomicUsize,
}

impl HttpBackend {
    /// `base_url` may be the server root or the full `/v1/logits` URL.
    pub fn new(base_url: impl Into<String>) -> Self {
        let base = base_url.into();
        let trimmed = base.trim_end_matches('/');
        let url = if trimmed.ends_with(LOGITS_PATH) {
            trimmed.to_string()
        } else {
            format!("{trimmed}{LOGITS_PATH}")
        };
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client construction");
        Self {
            client,
            url,
            bearer_token: None,
            retry: RetryPolicy::default(),
            sent: AtomicUsize::new(0),
        }
    }

    /// Reads the endpoint from `ENTRAIN_BACKEND_URL`.
    pub fn from_env() -> Option<Self> {
        std::env::var(BACKEND_URL_ENV)
            .ok()
            .filter(|u| !u.is_empty())
            .map(Self::new)
    }

    pub fn with_bearer_token(mut self, token: impl Into<String>) -> Self {
        self.bearer_token = Some(token.into());
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, query: &LogitQuery) -> Result<Vec<f64>, BackendError> {
        let mut request = self.client.post(&self.url).json(query);
        if let Some(token) = &self.bearer_token {
            request = request.bearer_auth(token);
        }
        self.sent.fetch_add(1, Ordering::Relaxed);
        let response = request.send().map_err(|e| BackendError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = response.status();
        if status != StatusCode::OK {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Transport {
                message: format!("{status}: {}", body.trim()),
                retryable: status.is_server_error(),
            });
        }
        let body = response.text().map_err(|e| BackendError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        let parsed: LogitResponse =
            serde_json::from_str(&body).map_err(|e| BackendError::Protocol(format!("malformed response: {e}")))?;
        Ok(parsed.logits)
    }
}

impl LogitSource for HttpBackend {
    fn fetch(&self, query: &LogitQuery) -> Result<Vec<f64>, BackendError> {
        let mut delay = self.retry.base_delay;
        let mut attempt = 1;
        loop {
            match self.attempt(query) {
                Err(e) if e.is_retryable() && attempt < self.retry.attempts => {
                    log::debug!("{} attempt {attempt} failed: {e}; retrying in {delay:?}", self.url);
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn requests_sent(&self) -> usize {
        self.sent.load(Ordering::Relaxed)
    }
}
