//! Records → aggregates → fits → baselines → sign split → trajectories → heatmap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::{gap_trajectories, heatmap_matrix, GapTrajectory, HeatmapMatrix};
use crate::backend::{LogitRecord, ModelSpec};
use crate::condition::ContextCondition;
use crate::error::AnalysisError;
use crate::metrics::{aggregate_all, ConditionAggregate, Metric};
use crate::report::ReportInput;
use crate::scaling::{
    classify_sign_split, fit_all, validate_baselines, BaselineReport, BaselineThresholds, FitOptions, PowerLawFit,
    SeriesFit, SignSplitReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub fit: FitOptions,
    pub baselines: BaselineThresholds,
    pub metrics: Vec<Metric>,
    pub sign_split_metric: Metric,
    /// A fit is called strong evidence of scaling when R² exceeds this ...
    pub r2_strong: f64,
    /// ... and p falls below this.
    pub p_strong: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            baselines: BaselineThresholds::default(),
            metrics: vec![Metric::DeltaDstr, Metric::DeltaOverall, Metric::DeltaGold],
            sign_split_metric: Metric::DeltaDstr,
            r2_strong: 0.8,
            p_strong: 0.01,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.r2_strong) || !(self.p_strong > 0.0 && self.p_strong < 1.0) {
            return Err(AnalysisError::Invalid(
                "r2_strong must be in [0, 1] and p_strong in (0, 1)".into(),
            ));
        }
        if !(self.fit.confidence > 0.0 && self.fit.confidence < 1.0) {
            return Err(AnalysisError::Invalid("confidence must be in (0, 1)".into()));
        }
        if self.metrics.is_empty() {
            return Err(AnalysisError::Invalid("no metrics selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FamilyAnalysis {
    pub family: String,
    pub aggregates: Vec<ConditionAggregate>,
    pub fits: Vec<SeriesFit>,
    pub baselines: BaselineReport,
    pub sign_split_metric: Metric,
    /// Absent when a condition of the split metric could not be fitted.
    pub sign_split: Option<SignSplitReport>,
    pub trajectories: Vec<GapTrajectory>,
    /// Absent when the (condition, size) grid has holes.
    pub heatmap: Option<HeatmapMatrix>,
}

impl FamilyAnalysis {
    pub fn fit(&self, metric: Metric, condition: ContextCondition) -> Option<&PowerLawFit> {
        self.fits
            .iter()
            .find(|f| f.metric == metric && f.condition == condition)
            .and_then(|f| f.result.as_ref().ok())
    }

    pub fn trajectory(&self, condition: ContextCondition) -> Option<&GapTrajectory> {
        self.trajectories.iter().find(|t| t.condition == condition)
    }

    pub fn report_input(&self) -> ReportInput<'_> {
        ReportInput {
            family: &self.family,
            aggregates: &self.aggregates,
            fits: &self.fits,
            baselines: Some(&self.baselines),
            sign_split: self.sign_split.as_ref().map(|s| (self.sign_split_metric, s)),
            trajectories: &self.trajectories,
            heatmap: self.heatmap.as_ref(),
        }
    }
}

/// Run the full analysis over one family's records. Needs at least three
/// distinct model sizes with records.
pub fn analyze(
    family: &str,
    records: &[LogitRecord],
    models: &[ModelSpec],
    config: &AnalysisConfig,
) -> Result<FamilyAnalysis, AnalysisError> {
    config.validate()?;
    let aggregates = aggregate_all(records, models);
    let sizes: BTreeSet<u64> = aggregates.iter().map(|a| a.param_count).collect();
    if sizes.len() < 3 {
        return Err(AnalysisError::TooFewSizes {
            needed: 3,
            got: sizes.len(),
        });
    }
    let mut metrics = config.metrics.clone();
    if !metrics.contains(&config.sign_split_metric) {
        metrics.push(config.sign_split_metric);
    }
    let fits = fit_all(&aggregates, &metrics, &config.fit);
    let baselines = validate_baselines(&aggregates, &config.baselines, &config.fit);

    let split_fits: BTreeMap<ContextCondition, PowerLawFit> = fits
        .iter()
        .filter(|f| f.metric == config.sign_split_metric)
        .filter_map(|f| f.result.as_ref().ok().map(|r| (f.condition, *r)))
        .collect();
    let sign_split = match classify_sign_split(&split_fits) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("{family}: sign split skipped: {e}");
            None
        }
    };
    let heatmap = match heatmap_matrix(&aggregates) {
        Ok(h) => Some(h),
        Err(e) => {
            log::warn!("{family}: heatmap skipped: {e}");
            None
        }
    };
    Ok(FamilyAnalysis {
        family: family.to_string(),
        trajectories: gap_trajectories(&aggregates),
        aggregates,
        fits,
        baselines,
        sign_split_metric: config.sign_split_metric,
        sign_split,
        heatmap,
    })
}
