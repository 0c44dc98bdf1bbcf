//! Per-probe logit shifts and per-(model, condition) means.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{LogitRecord, ModelSpec};
use crate::condition::ContextCondition;
use crate::error::{AnalysisError, ValidationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrainmentRecord {
    pub probe_id: String,
    pub model: String,
    pub condition: ContextCondition,
    /// Gold logit with context minus without.
    pub delta_gold: f64,
    /// Distractor logit with context minus without. Positive means entrainment.
    pub delta_dstr: f64,
    /// Relative advantage `delta_gold - delta_dstr`.
    pub delta_overall: f64,
}

pub fn compute_entrainment(record: &LogitRecord) -> EntrainmentRecord {
    let delta_gold = record.gold_ctx - record.gold_noctx;
    let delta_dstr = record.dstr_ctx - record.dstr_noctx;
    EntrainmentRecord {
        probe_id: record.probe_id.clone(),
        model: record.model.clone(),
        condition: record.condition,
        delta_gold,
        delta_dstr,
        delta_overall: delta_gold - delta_dstr,
    }
}

/// Means over all probes of one model under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAggregate {
    pub model: String,
    pub param_count: u64,
    pub condition: ContextCondition,
    pub n: usize,
    pub dstr_no: f64,
    pub dstr_with: f64,
    pub delta_dstr: f64,
    pub gold_no: f64,
    pub gold_with: f64,
    pub delta_gold: f64,
    /// `gold_no - dstr_no`
    pub overall_no: f64,
    pub overall_with: f64,
    pub delta_overall: f64,
}

/// Which column of a [`ConditionAggregate`] a scaling series is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DeltaDstr,
    DeltaGold,
    DeltaOverall,
    DstrNo,
    DstrWith,
    GoldNo,
    GoldWith,
    OverallNo,
    OverallWith,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::DeltaDstr,
        Metric::DeltaGold,
        Metric::DeltaOverall,
        Metric::DstrNo,
        Metric::DstrWith,
        Metric::GoldNo,
        Metric::GoldWith,
        Metric::OverallNo,
        Metric::OverallWith,
    ];

    pub fn value(self, a: &ConditionAggregate) -> f64 {
        match self {
            Metric::DeltaDstr => a.delta_dstr,
            Metric::DeltaGold => a.delta_gold,
            Metric::DeltaOverall => a.delta_overall,
            Metric::DstrNo => a.dstr_no,
            Metric::DstrWith => a.dstr_with,
            Metric::GoldNo => a.gold_no,
            Metric::GoldWith => a.gold_with,
            Metric::OverallNo => a.overall_no,
            Metric::OverallWith => a.overall_with,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::DeltaDstr => "delta_dstr",
            Metric::DeltaGold => "delta_gold",
            Metric::DeltaOverall => "delta_overall",
            Metric::DstrNo => "dstr_no",
            Metric::DstrWith => "dstr_with",
            Metric::GoldNo => "gold_no",
            Metric::GoldWith => "gold_with",
            Metric::OverallNo => "overall_no",
            Metric::OverallWith => "overall_with",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::DeltaDstr => "Δ distractor",
            Metric::DeltaGold => "Δ gold",
            Metric::DeltaOverall => "Δ overall (gold − distractor)",
            Metric::DstrNo => "Distractor (no ctx)",
            Metric::DstrWith => "Distractor (w/ ctx)",
            Metric::GoldNo => "Gold (no ctx)",
            Metric::GoldWith => "Gold (w/ ctx)",
            Metric::OverallNo => "Overall (no ctx)",
            Metric::OverallWith => "Overall (w/ ctx)",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ValidationError::new(format!("unknown metric `{s}`")))
    }
}

/// Means over every record of `model` under `condition`.
///
/// Records are summed in (probe id, value) order so the result depends only
/// on the multiset of inputs.
pub fn aggregate(
    records: &[LogitRecord],
    model: &ModelSpec,
    condition: ContextCondition,
) -> Result<ConditionAggregate, AnalysisError> {
    let mut group: Vec<&LogitRecord> = records
        .iter()
        .filter(|r| r.model == model.name && r.condition == condition)
        .collect();
    if group.is_empty() {
        return Err(AnalysisError::EmptyGroup {
            model: model.name.clone(),
            condition,
        });
    }
    group.sort_by(|a, b| {
        a.probe_id
            .cmp(&b.probe_id)
            .then(a.gold_ctx.total_cmp(&b.gold_ctx))
            .then(a.gold_noctx.total_cmp(&b.gold_noctx))
            .then(a.dstr_ctx.total_cmp(&b.dstr_ctx))
            .then(a.dstr_noctx.total_cmp(&b.dstr_noctx))
    });

    let n = group.len();
    let mut sums = [0.0f64; 9];
    for r in &group {
        let e = compute_entrainment(r);
        let row = [
            r.dstr_noctx,
            r.dstr_ctx,
            e.delta_dstr,
            r.gold_noctx,
            r.gold_ctx,
            e.delta_gold,
            r.gold_noctx - r.dstr_noctx,
            r.gold_ctx - r.dstr_ctx,
            e.delta_overall,
        ];
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let m = sums.map(|s| s / n as f64);
    Ok(ConditionAggregate {
        model: model.name.clone(),
        param_count: model.param_count,
        condition,
        n,
        dstr_no: m[0],
        dstr_with: m[1],
        delta_dstr: m[2],
        gold_no: m[3],
        gold_with: m[4],
        delta_gold: m[5],
        overall_no: m[6],
        overall_with: m[7],
        delta_overall: m[8],
    })
}

/// Every (model, condition) group that has records, ordered by condition then size.
pub fn aggregate_all(records: &[LogitRecord], models: &[ModelSpec]) -> Vec<ConditionAggregate> {
    let mut out = Vec::new();
    for condition in ContextCondition::ALL {
        let mut sized: Vec<&ModelSpec> = models.iter().collect();
        sized.sort_by_key(|m| m.param_count);
        for model in sized {
            if let Ok(a) = aggregate(records, model, condition) {
                out.push(a);
            }
        }
    }
    out
}

pub const AGGREGATE_HEADER: &str = "setting,model,param_count,n,dstr_no,dstr_with,dstr_delta,gold_no,gold_with,gold_delta,overall_no,overall_with,overall_delta";

/// CSV rows in the aggregate table layout. `decimals = None` keeps full precision.
pub fn write_aggregates_csv<W: Write>(
    mut w: W,
    aggregates: &[ConditionAggregate],
    decimals: Option<usize>,
) -> std::io::Result<()> {
    let num = |v: f64| match decimals {
        Some(d) => format!("{v:.d$}"),
        None => format!("{v}"),
    };
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for a in aggregates {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.condition,
            a.model,
            a.param_count,
            a.n,
            num(a.dstr_no),
            num(a.dstr_with),
            num(a.delta_dstr),
            num(a.gold_no),
            num(a.gold_with),
            num(a.delta_gold),
            num(a.overall_no),
            num(a.overall_with),
            num(a.delta_overall)
        )?;
    }
    Ok(())
}
