//! Logit acquisition: live HTTP endpoints, a deterministic mock, and file replay.
//!
//! Every source answers the same question: for a prompt and a list of
//! candidate strings, what is the next-token logit of each candidate's first
//! sub-token. Tokenization happens on the serving side.

mod cache;
mod http;
mod mock;
mod replay;
mod runner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::ContextCondition;
use crate::error::ValidationError;

pub use cache::{cache_key, LogitCache};
pub use http::{HttpBackend, RetryPolicy, BACKEND_URL_ENV, LOGITS_PATH};
pub use mock::MockBackend;
pub use replay::{read_records_jsonl, write_records_jsonl, ReplaySource, AGGREGATE_CSV_HEADER};
pub use runner::{probe_model, ProbeFailure, ProbeRun, RunOptions};

/// Where a model's logits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Endpoint {
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bearer_token: Option<String>,
    },
    Replay {
        path: String,
    },
    Mock {
        #[serde(default = "MockBackend::default_base")]
        base: f64,
        #[serde(default)]
        boost: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub family: String,
    /// Parameter count N used as the abscissa of every scaling fit.
    pub param_count: u64,
    pub backend: BackendConfig,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.name.trim().is_empty() {
            return Err(ValidationError::new("model with empty name"));
        }
        if self.param_count == 0 {
            return Err(ValidationError::new(format!(
                "model `{}`: param_count must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Identifies which probe and which side of the with/without pair a query belongs to.
/// Replay sources need it; live backends ignore it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOrigin {
    pub probe_id: String,
    pub with_context: bool,
}

/// Body of one `/v1/logits` request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitQuery {
    pub prompt: String,
    pub candidates: Vec<String>,
    #[serde(skip)]
    pub origin: Option<QueryOrigin>,
}

impl LogitQuery {
    pub fn new(prompt: impl Into<String>, candidates: Vec<String>) -> Self {
        Self {
            prompt: prompt.into(),
            candidates,
            origin: None,
        }
    }

    pub fn with_origin(mut self, probe_id: impl Into<String>, with_context: bool) -> Self {
        self.origin = Some(QueryOrigin {
            probe_id: probe_id.into(),
            with_context,
        });
        self
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.candidates.is_empty() {
            return Err(ValidationError::new("logit query without candidates"));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if self.candidates[..i].contains(c) {
                return Err(ValidationError::new(format!("duplicate candidate {c:?}")));
            }
        }
        Ok(())
    }
}

/// The four raw logits of one probe on one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord {
    pub probe_id: String,
    pub model: String,
    pub condition: ContextCondition,
    pub gold_ctx: f64,
    pub gold_noctx: f64,
    pub dstr_ctx: f64,
    pub dstr_noctx: f64,
}

impl LogitRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let values = [self.gold_ctx, self.gold_noctx, self.dstr_ctx, self.dstr_noctx];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::new(format!(
                "record {} on {}: non-finite logit",
                self.probe_id, self.model
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    /// Connection failures and 5xx responses are `retryable`; 4xx are not.
    #[error("transport error{}: {message}", if *.retryable { " (retryable)" } else { "" })]
    Transport { message: String, retryable: bool },
    #[error("no logits recorded for probe `{probe_id}` on model `{model}`")]
    DataGap { probe_id: String, model: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid query: {0}")]
    InvalidQuery(#[from] ValidationError),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { retryable: true, .. })
    }
}

/// Anything that can score candidate next tokens.
pub trait LogitSource: Send + Sync {
    /// Raw logits, one per candidate. Callers should go through [`fetch_logits`],
    /// which validates the response shape.
    fn fetch(&self, query: &LogitQuery) -> Result<Vec<f64>, BackendError>;

    /// Number of requests that actually left the process (zero for offline sources).
    fn requests_sent(&self) -> usize {
        0
    }
}

/// Fetch one finite logit per candidate, in candidate order.
pub fn fetch_logits(source: &dyn LogitSource, query: &LogitQuery) -> Result<Vec<f64>, BackendError> {
    query.validate()?;
    let logits = source.fetch(query)?;
    if logits.len() != query.candidates.len() {
        return Err(BackendError::Protocol(format!(
            "expected {} logits, got {}",
            query.candidates.len(),
            logits.len()
        )));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(BackendError::Protocol(format!("non-finite logit {bad}")));
    }
    Ok(logits)
}

/// Build the source described by `spec.backend`.
pub fn connect(spec: &ModelSpec) -> Result<Box<dyn LogitSource>, crate::error::DataError> {
    Ok(match &spec.backend {
        BackendConfig::Endpoint { url, bearer_token } => {
            let mut backend = HttpBackend::new(url.clone());
            if let Some(token) = bearer_token {
                backend = backend.with_bearer_token(token.clone());
            }
            Box::new(backend)
        }
        BackendConfig::Replay { path } => Box::new(ReplaySource::open(path)?.for_model(&spec.name)),
        BackendConfig::Mock { base, boost } => Box::new(MockBackend::new(*base, *boost)),
    })
}

/// Default parameter counts for the model families the fixtures cover.
pub fn nominal_param_count(model: &str) -> Option<u64> {
    let size = model.rsplit('-').next()?;
    let (digits, scale) = match size.strip_suffix('M') {
        Some(d) => (d, 1e6),
        None => (size.strip_suffix('B')?, 1e9),
    };
    let value: f64 = digits.parse().ok()?;
    Some((value * scale).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl LogitSource for Fixed {
        fn fetch(&self, _: &LogitQuery) -> Result<Vec<f64>, BackendError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn wrong_length_is_protocol_error() {
        let q = LogitQuery::new("p", vec!["a".into(), "b".into()]);
        assert!(matches!(
            fetch_logits(&Fixed(vec![1.0]), &q),
            Err(BackendError::Protocol(_))
        ));
    }

    #[test]
    fn non_finite_is_protocol_error() {
        let q = LogitQuery::new("p", vec!["a".into()]);
        assert!(matches!(
            fetch_logits(&Fixed(vec![f64::NAN]), &q),
            Err(BackendError::Protocol(_))
        ));
    }

    #[test]
    fn duplicate_candidates_rejected() {
        let q = LogitQuery::new("p", vec!["a".into(), "a".into()]);
        assert!(matches!(
            fetch_logits(&Fixed(vec![1.0, 1.0]), &q),
            Err(BackendError::InvalidQuery(_))
        ));
    }

    #[test]
    fn nominal_sizes() {
        assert_eq!(nominal_param_count("cerebras-111M"), Some(111_000_000));
        assert_eq!(nominal_param_count("cerebras-1.3B"), Some(1_300_000_000));
        assert_eq!(nominal_param_count("pythia-12B"), Some(12_000_000_000));
        assert_eq!(nominal_param_count("gpt"), None);
    }

    #[test]
    fn wire_body_omits_origin() {
        let q = LogitQuery::new(
            "Calculator. The capital of Germany is",
            vec!["Berlin".into(), "Calculator".into()],
        )
        .with_origin("abc", true);
        assert_eq!(
            serde_json::to_string(&q).unwrap(),
            r#"{"prompt":"Calculator. The capital of Germany is","candidates":["Berlin","Calculator"]}"#
        );
    }
}
