//! Power-law fits `|E(N)| = a·N^b` by least squares in log10-log10 space.
//!
//! The sign of a series is carried separately from its magnitude, so a
//! strictly negative series (e.g. a relative advantage that stays below zero)
//! is fitted on its absolute values and `b` describes how the magnitude scales.

mod baseline;
mod sign_split;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::condition::ContextCondition;
use crate::error::FitError;
use crate::metrics::{ConditionAggregate, Metric};
use crate::stats::{student_t_quantile, student_t_two_sided_p};

pub use baseline::{validate_baselines, BaselineEntry, BaselineReport, BaselineThresholds};
pub use sign_split::{classify_sign_split, ContextGroup, SignSplitEntry, SignSplitReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Parameter count N.
    pub n: u64,
    pub value: f64,
}

impl SeriesPoint {
    pub fn new(n: u64, value: f64) -> Self {
        Self { n, value }
    }
}

/// Critical-value family for confidence intervals and p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inference {
    /// Student-t with `n_points − 2` degrees of freedom.
    #[default]
    StudentT,
    /// Standard normal; only sensible for long series.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub inference: Inference,
    pub confidence: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            inference: Inference::StudentT,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Multiplier on |E|.
    pub a: f64,
    /// Exponent (slope of log10|E| on log10 N).
    pub b: f64,
    pub se_b: f64,
    pub ci95: (f64, f64),
    pub r_squared: f64,
    pub p_value: f64,
    pub n_points: usize,
    /// +1 or −1.
    pub series_sign: i8,
}

impl PowerLawFit {
    /// Fitted value at `n`, sign included.
    pub fn predict(&self, n: f64) -> f64 {
        self.series_sign as f64 * self.a * n.powf(self.b)
    }

    /// Fitted log10|E| at log10 N = `x`.
    pub fn predict_log10(&self, x: f64) -> f64 {
        self.a.log10() + self.b * x
    }

    pub fn ci_excludes_zero(&self) -> bool {
        (self.ci95.0 > 0.0 && self.ci95.1 > 0.0) || (self.ci95.0 < 0.0 && self.ci95.1 < 0.0)
    }

    /// `R² > r2_min` and `p < p_max`.
    pub fn is_strong(&self, r2_min: f64, p_max: f64) -> bool {
        self.r_squared > r2_min && self.p_value < p_max
    }
}

fn check_series(series: &[SeriesPoint]) -> Result<i8, FitError> {
    if series.len() < 3 {
        return Err(FitError::InsufficientData(series.len()));
    }
    for p in series {
        if p.n == 0 {
            return Err(FitError::Validation("parameter count must be positive".into()));
        }
        if p.value == 0.0 || !p.value.is_finite() {
            return Err(FitError::Domain(p.n));
        }
    }
    let positive = series.iter().filter(|p| p.value > 0.0).count();
    let sign = if positive == series.len() {
        1
    } else if positive == 0 {
        -1
    } else {
        return Err(FitError::MixedSign);
    };
    let mut ns: Vec<u64> = series.iter().map(|p| p.n).collect();
    ns.sort_unstable();
    if let Some(w) = ns.windows(2).find(|w| w[0] == w[1]) {
        return Err(FitError::Validation(format!("duplicate parameter count {}", w[0])));
    }
    Ok(sign)
}

pub fn fit_power_law(series: &[SeriesPoint]) -> Result<PowerLawFit, FitError> {
    fit_power_law_with(series, &FitOptions::default())
}

pub fn fit_power_law_with(series: &[SeriesPoint], options: &FitOptions) -> Result<PowerLawFit, FitError> {
    let series_sign = check_series(series)?;
    let k = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| (p.n as f64).log10()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.value.abs().log10()).collect();
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let b = sxy / sxx;
    let intercept = y_mean - b * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + b * x);
            r * r
        })
        .sum();
    // A constant series explains nothing: report R² = 0 rather than 0/0.
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let df = series.len() - 2;
    let se_b = (sse / df as f64 / sxx).sqrt();

    let upper = 0.5 + 0.5 * options.confidence;
    let (critical, p_value) = match options.inference {
        Inference::StudentT => {
            let crit = student_t_quantile(upper, df as u32);
            let p = if se_b > 0.0 {
                student_t_two_sided_p(b / se_b, df as u32)
            } else if b == 0.0 {
                1.0
            } else {
                f64::MIN_POSITIVE
            };
            (crit, p)
        }
        Inference::Normal => {
            let crit = Normal::standard().inverse_cdf(upper);
            let p = if se_b > 0.0 {
                erfc((b / se_b).abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
            } else if b == 0.0 {
                1.0
            } else {
                f64::MIN_POSITIVE
            };
            (crit, p)
        }
    };
    let half = critical * se_b;
    Ok(PowerLawFit {
        a: 10f64.powf(intercept),
        b,
        se_b,
        ci95: (b - half, b + half),
        r_squared,
        p_value,
        n_points: series.len(),
        series_sign,
    })
}

/// The (N, metric) series of one condition, ascending in N.
pub fn series(aggregates: &[ConditionAggregate], condition: ContextCondition, metric: Metric) -> Vec<SeriesPoint> {
    let mut out: Vec<SeriesPoint> = aggregates
        .iter()
        .filter(|a| a.condition == condition)
        .map(|a| SeriesPoint::new(a.param_count, metric.value(a)))
        .collect();
    out.sort_by_key(|p| p.n);
    out
}

/// One line of the fit report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub metric: Metric,
    pub condition: ContextCondition,
    pub family: String,
    pub a: f64,
    pub b: f64,
    pub se_b: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
    pub p: f64,
    pub n_points: usize,
    pub sign: i8,
}

impl FitReport {
    pub fn new(family: &str, metric: Metric, condition: ContextCondition, fit: &PowerLawFit) -> Self {
        Self {
            metric,
            condition,
            family: family.to_string(),
            a: fit.a,
            b: fit.b,
            se_b: fit.se_b,
            ci_lo: fit.ci95.0,
            ci_hi: fit.ci95.1,
            r2: fit.r_squared,
            p: fit.p_value,
            n_points: fit.n_points,
            sign: fit.series_sign,
        }
    }

    pub fn fit(&self) -> PowerLawFit {
        PowerLawFit {
            a: self.a,
            b: self.b,
            se_b: self.se_b,
            ci95: (self.ci_lo, self.ci_hi),
            r_squared: self.r2,
            p_value: self.p,
            n_points: self.n_points,
            series_sign: self.sign,
        }
    }
}

/// Outcome of fitting one (metric, condition) series; unfittable series keep their reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub metric: Metric,
    pub condition: ContextCondition,
    pub points: Vec<SeriesPoint>,
    pub result: Result<PowerLawFit, FitError>,
}

/// Fit every requested metric for every condition present in `aggregates`.
pub fn fit_all(aggregates: &[ConditionAggregate], metrics: &[Metric], options: &FitOptions) -> Vec<SeriesFit> {
    let mut out = Vec::new();
    for &metric in metrics {
        for condition in ContextCondition::ALL {
            let points = series(aggregates, condition, metric);
            if points.is_empty() {
                continue;
            }
            let result = fit_power_law_with(&points, options);
            out.push(SeriesFit {
                metric,
                condition,
                points,
                result,
            });
        }
    }
    out
}
