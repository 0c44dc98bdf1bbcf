//! Runs a probe set against one model with bounded parallelism.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::Serialize;

use super::{fetch_logits, BackendError, LogitCache, LogitQuery, LogitRecord, LogitSource, ModelSpec};
use crate::probe::{render_prompts, ProbeInstance};

#[derive(Debug, Clone, Copy)]
pub struct RunOptions<'a> {
    /// Maximum number of probes in flight.
    pub concurrency: usize,
    pub cache: Option<&'a LogitCache>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            concurrency: 4,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeFailure {
    pub probe_id: String,
    pub model: String,
    /// One of `transport`, `data_gap`, `protocol`, `invalid`.
    pub kind: &'static str,
    pub message: String,
    #[serde(skip)]
    pub error: BackendError,
}

impl ProbeFailure {
    fn new(probe_id: &str, model: &str, error: BackendError) -> Self {
        let kind = match &error {
            BackendError::Transport { .. } => "transport",
            BackendError::DataGap { .. } => "data_gap",
            BackendError::Protocol(_) => "protocol",
            BackendError::InvalidQuery(_) => "invalid",
        };
        Self {
            probe_id: probe_id.to_string(),
            model: model.to_string(),
            kind,
            message: error.to_string(),
            error,
        }
    }
}

/// Successful records sorted by probe id, plus one entry per failed probe.
#[derive(Debug, Clone, Default)]
pub struct ProbeRun {
    pub records: Vec<LogitRecord>,
    pub failures: Vec<ProbeFailure>,
}

fn query_once(
    model: &ModelSpec,
    source: &dyn LogitSource,
    cache: Option<&LogitCache>,
    query: &LogitQuery,
) -> Result<Vec<f64>, BackendError> {
    if let Some(hit) = cache.and_then(|c| c.get(&model.name, query)) {
        return Ok(hit);
    }
    let logits = fetch_logits(source, query)?;
    if let Some(c) = cache {
        if let Err(e) = c.insert(&model.name, query, &logits) {
            log::warn!("cache write to {} failed: {e}", c.path().display());
        }
    }
    Ok(logits)
}

fn run_one(
    model: &ModelSpec,
    source: &dyn LogitSource,
    cache: Option<&LogitCache>,
    probe: &ProbeInstance,
) -> Result<LogitRecord, BackendError> {
    let (with_context, without_context) = render_prompts(probe);
    let candidates = vec![probe.gold.clone(), probe.distractor.clone()];
    let with = LogitQuery::new(with_context, candidates.clone()).with_origin(&probe.id, true);
    let without = LogitQuery::new(without_context, candidates).with_origin(&probe.id, false);
    let ctx = query_once(model, source, cache, &with)?;
    let noctx = query_once(model, source, cache, &without)?;
    Ok(LogitRecord {
        probe_id: probe.id.clone(),
        model: model.name.clone(),
        condition: probe.condition,
        gold_ctx: ctx[0],
        gold_noctx: noctx[0],
        dstr_ctx: ctx[1],
        dstr_noctx: noctx[1],
    })
}

/// One record per probe from a with-context and a without-context query.
///
/// The result does not depend on scheduling: records are sorted by probe id
/// and failures by probe id. Failed probes never abort the others.
pub fn probe_model(
    model: &ModelSpec,
    source: &dyn LogitSource,
    probes: &[ProbeInstance],
    options: &RunOptions<'_>,
) -> ProbeRun {
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(probes.len()));
    let workers = options.concurrency.clamp(1, probes.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(probe) = probes.get(i) else { break };
                let outcome = run_one(model, source, options.cache, probe);
                results.lock().unwrap().push((i, outcome));
            });
        }
    });

    let mut run = ProbeRun::default();
    for (i, outcome) in results.into_inner().unwrap() {
        match outcome {
            Ok(record) => run.records.push(record),
            Err(e) => run.failures.push(ProbeFailure::new(&probes[i].id, &model.name, e)),
        }
    }
    run.records.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
    run.failures.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
    run
}
