use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PowerLawFit;
use crate::condition::ContextCondition;
use crate::error::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextGroup {
    Semantic,
    NonSemantic,
}

impl ContextGroup {
    pub fn of(condition: ContextCondition) -> Self {
        if condition.is_semantic() {
            ContextGroup::Semantic
        } else {
            ContextGroup::NonSemantic
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSplitEntry {
    pub condition: ContextCondition,
    pub group: ContextGroup,
    pub fit: PowerLawFit,
    pub excludes_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSplitReport {
    pub entries: Vec<SignSplitEntry>,
    /// Every semantic interval lies entirely below zero.
    pub semantic_negative: bool,
    /// Every non-semantic interval lies entirely above zero.
    pub non_semantic_positive: bool,
    /// The hull of one group's intervals lies strictly to one side of the other's.
    pub groups_separated: bool,
}

impl SignSplitReport {
    /// The full pattern: semantic CIs below zero, non-semantic above, no overlap.
    pub fn holds(&self) -> bool {
        self.semantic_negative && self.non_semantic_positive && self.groups_separated
    }
}

/// Group the four per-condition fits and compare their confidence intervals.
pub fn classify_sign_split(fits: &BTreeMap<ContextCondition, PowerLawFit>) -> Result<SignSplitReport, AnalysisError> {
    let mut entries = Vec::with_capacity(4);
    for condition in ContextCondition::ALL {
        let fit = fits.get(&condition).ok_or(AnalysisError::MissingCondition(condition))?;
        entries.push(SignSplitEntry {
            condition,
            group: ContextGroup::of(condition),
            fit: *fit,
            excludes_zero: fit.ci_excludes_zero(),
        });
    }
    let group = |g: ContextGroup| entries.iter().filter(move |e| e.group == g);
    let hull = |g: ContextGroup| {
        group(g).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.fit.ci95.0), hi.max(e.fit.ci95.1))
        })
    };
    let (sem_lo, sem_hi) = hull(ContextGroup::Semantic);
    let (non_lo, non_hi) = hull(ContextGroup::NonSemantic);
    Ok(SignSplitReport {
        semantic_negative: group(ContextGroup::Semantic).all(|e| e.fit.ci95.1 < 0.0),
        non_semantic_positive: group(ContextGroup::NonSemantic).all(|e| e.fit.ci95.0 > 0.0),
        groups_separated: sem_hi < non_lo || non_hi < sem_lo,
        entries,
    })
}
