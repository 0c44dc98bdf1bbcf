//! No-context baseline checks: gold logits should scale uniformly with size,
//! distractor logits should not scale at all.

use serde::{Deserialize, Serialize};

use super::{fit_power_law_with, series, FitOptions, PowerLawFit};
use crate::condition::ContextCondition;
use crate::metrics::{ConditionAggregate, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineThresholds {
    /// Gold fits must exceed this R².
    pub gold_r2_min: f64,
    /// Inclusive band for the gold exponent.
    pub gold_b_band: (f64, f64),
    /// Distractor fits count as non-scaling below this R² ...
    pub dstr_r2_max: f64,
    /// ... or above this p-value.
    pub dstr_p_min: f64,
}

impl Default for BaselineThresholds {
    fn default() -> Self {
        Self {
            gold_r2_min: 0.93,
            gold_b_band: (0.10, 0.16),
            dstr_r2_max: 0.25,
            dstr_p_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub condition: ContextCondition,
    pub gold_no: Option<PowerLawFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_error: Option<String>,
    pub gold_pass: bool,
    pub dstr_no: Option<PowerLawFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dstr_error: Option<String>,
    pub dstr_non_scaling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub thresholds: BaselineThresholds,
    pub entries: Vec<BaselineEntry>,
}

impl BaselineReport {
    pub fn all_gold_pass(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.gold_pass)
    }

    pub fn all_dstr_non_scaling(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.dstr_non_scaling)
    }
}

impl BaselineThresholds {
    pub fn gold_passes(&self, fit: &PowerLawFit) -> bool {
        fit.r_squared > self.gold_r2_min && fit.b >= self.gold_b_band.0 && fit.b <= self.gold_b_band.1
    }

    pub fn dstr_non_scaling(&self, fit: &PowerLawFit) -> bool {
        fit.r_squared < self.dstr_r2_max || fit.p_value > self.dstr_p_min
    }
}

/// Fit gold and distractor no-context series per condition. Fit failures are
/// recorded on the entry and count as not passing.
pub fn validate_baselines(
    aggregates: &[ConditionAggregate],
    thresholds: &BaselineThresholds,
    options: &FitOptions,
) -> BaselineReport {
    let mut entries = Vec::new();
    for condition in ContextCondition::ALL {
        let gold = series(aggregates, condition, Metric::GoldNo);
        if gold.is_empty() {
            continue;
        }
        let dstr = series(aggregates, condition, Metric::DstrNo);
        let gold_fit = fit_power_law_with(&gold, options);
        let dstr_fit = fit_power_law_with(&dstr, options);
        entries.push(BaselineEntry {
            condition,
            gold_pass: gold_fit.as_ref().is_ok_and(|f| thresholds.gold_passes(f)),
            gold_error: gold_fit.as_ref().err().map(ToString::to_string),
            gold_no: gold_fit.ok(),
            dstr_non_scaling: dstr_fit.as_ref().is_ok_and(|f| thresholds.dstr_non_scaling(f)),
            dstr_error: dstr_fit.as_ref().err().map(ToString::to_string),
            dstr_no: dstr_fit.ok(),
        });
    }
    BaselineReport {
        thresholds: *thresholds,
        entries,
    }
}
