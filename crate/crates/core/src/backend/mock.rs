use std::sync::atomic::{AtomicUsize, Ordering};

use super::{BackendError, LogitQuery, LogitSource};

/// Scores every candidate `base`, plus `boost` when the candidate string occurs in the prompt.
///
/// Under this rule a probe's distractor gains exactly `boost` from its context
/// while a gold answer absent from the context gains nothing.
#[derive(Debug)]
pub struct MockBackend {
    base: f64,
    boost: f64,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(base: f64, boost: f64) -> Self {
        Self {
            base,
            boost,
            calls: AtomicUsize::new(0),
        }
    }

    pub(crate) fn default_base() -> f64 {
        1.0
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl LogitSource for MockBackend {
    fn fetch(&self, query: &LogitQuery) -> Result<Vec<f64>, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(query
            .candidates
            .iter()
            .map(|c| {
                if query.prompt.contains(c.as_str()) {
                    self.base + self.boost
                } else {
                    self.base
                }
            })
            .collect())
    }

    fn requests_sent(&self) -> usize {
        self.calls()
    }
}
