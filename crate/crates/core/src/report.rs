//! Report directory emission: Markdown summary, JSON, plot-data CSVs, optional
//! SVG, and a manifest of content hashes.
//!
//! Every file is rendered in memory first. The manifest is written last, so a
//! failed run never leaves a manifest describing files that are not there.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{GapDirection, GapTrajectory, HeatmapMatrix};
use crate::condition::ContextCondition;
use crate::error::{FitError, ReportError};
use crate::metrics::{write_aggregates_csv, ConditionAggregate, Metric};
use crate::scaling::{BaselineReport, FitReport, PowerLawFit, SeriesFit, SignSplitReport};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything a report is built from. All parts are assumed to describe the
/// same family and the same set of model sizes.
#[derive(Debug, Clone, Copy)]
pub struct ReportInput<'a> {
    pub family: &'a str,
    pub aggregates: &'a [ConditionAggregate],
    pub fits: &'a [SeriesFit],
    pub baselines: Option<&'a BaselineReport>,
    /// The metric the sign split was evaluated on, with its verdict.
    pub sign_split: Option<(Metric, &'a SignSplitReport)>,
    pub trajectories: &'a [GapTrajectory],
    pub heatmap: Option<&'a HeatmapMatrix>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Also write `loglog_<condition>.svg`.
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.path == path)
    }
}

#[derive(Serialize)]
struct UnfittedSeries {
    metric: Metric,
    condition: ContextCondition,
    error: String,
}

#[derive(Serialize)]
struct SignSplitJson<'a> {
    metric: Metric,
    #[serde(flatten)]
    report: &'a SignSplitReport,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    family: &'a str,
    fits: Vec<FitReport>,
    unfitted: Vec<UnfittedSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baselines: Option<&'a BaselineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sign_split: Option<SignSplitJson<'a>>,
    trajectories: &'a [GapTrajectory],
    #[serde(skip_serializing_if = "Option::is_none")]
    heatmap: Option<&'a HeatmapMatrix>,
}

/// All report files keyed by relative path, without touching the filesystem.
pub fn render_report(
    input: &ReportInput<'_>,
    options: &ReportOptions,
) -> Result<BTreeMap<String, Vec<u8>>, ReportError> {
    if input.fits.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut files = BTreeMap::new();
    files.insert("report.md".to_string(), render_markdown(input).into_bytes());
    files.insert("fits.json".to_string(), render_json(input)?);

    let mut agg = Vec::new();
    write_aggregates_csv(&mut agg, input.aggregates, None).map_err(|e| ReportError::Serialize {
        what: "aggregates.csv".into(),
        message: e.to_string(),
    })?;
    files.insert("aggregates.csv".to_string(), agg);

    if let Some(h) = input.heatmap {
        let mut out = Vec::new();
        h.write_csv(&mut out).map_err(|e| ReportError::Serialize {
            what: "heatmap.csv".into(),
            message: e.to_string(),
        })?;
        files.insert("heatmap.csv".to_string(), out);
    }

    for condition in ContextCondition::ALL {
        let series: Vec<&SeriesFit> = input.fits.iter().filter(|f| f.condition == condition).collect();
        if series.is_empty() {
            continue;
        }
        files.insert(format!("loglog_{condition}.csv"), loglog_csv(&series).into_bytes());
        if options.svg {
            if let Some(svg) = loglog_svg(series[0]) {
                files.insert(format!("loglog_{condition}.svg"), svg.into_bytes());
            }
        }
    }
    for t in input.trajectories {
        files.insert(
            format!("trajectory_{}.csv", t.condition),
            trajectory_csv(t).into_bytes(),
        );
    }
    Ok(files)
}

/// Render, then write every file into `out_dir` followed by `manifest.json`.
pub fn emit_report(input: &ReportInput<'_>, out_dir: &Path, options: &ReportOptions) -> Result<Manifest, ReportError> {
    let files = render_report(input, options)?;
    let io = |path: PathBuf| move |source| ReportError::Io { path, source };
    fs::create_dir_all(out_dir).map_err(io(out_dir.to_path_buf()))?;
    let mut manifest = Manifest { files: Vec::new() };
    for (name, bytes) in &files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(io(path.clone()))?;
        manifest.files.push(ManifestEntry {
            path: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
    }
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| ReportError::Serialize {
        what: MANIFEST_FILE.into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    let tmp = out_dir.join(format!(".{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, &text).map_err(io(tmp.clone()))?;
    let dest = out_dir.join(MANIFEST_FILE);
    fs::rename(&tmp, &dest).map_err(io(dest))?;
    Ok(manifest)
}

/// One CSV row per successful fit, in the fit-report column order.
pub fn render_fits_csv(family: &str, fits: &[SeriesFit]) -> String {
    let mut out = String::from("metric,condition,family,a,b,se_b,ci_lo,ci_hi,r2,p,n_points,sign\n");
    for s in fits {
        if let Ok(fit) = &s.result {
            let r = FitReport::new(family, s.metric, s.condition, fit);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.metric, r.condition, r.family, r.a, r.b, r.se_b, r.ci_lo, r.ci_hi, r.r2, r.p, r.n_points, r.sign
            );
        }
    }
    out
}

fn render_json(input: &ReportInput<'_>) -> Result<Vec<u8>, ReportError> {
    let mut fits = Vec::new();
    let mut unfitted = Vec::new();
    for s in input.fits {
        match &s.result {
            Ok(fit) => fits.push(FitReport::new(input.family, s.metric, s.condition, fit)),
            Err(e) => unfitted.push(UnfittedSeries {
                metric: s.metric,
                condition: s.condition,
                error: e.to_string(),
            }),
        }
    }
    let doc = ReportJson {
        family: input.family,
        fits,
        unfitted,
        baselines: input.baselines,
        sign_split: input
            .sign_split
            .map(|(metric, report)| SignSplitJson { metric, report }),
        trajectories: input.trajectories,
        heatmap: input.heatmap,
    };
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| ReportError::Serialize {
        what: "fits.json".into(),
        message: e.to_string(),
    })?;
    out.push(b'\n');
    Ok(out)
}

fn fmt_p(p: f64) -> String {
    if p >= 0.001 {
        format!("{p:.4}")
    } else {
        format!("{p:.2e}")
    }
}

fn fmt_signed(v: f64) -> String {
    if v >= 0.0 {
        format!("+{v:.3}")
    } else {
        format!("{v:.3}")
    }
}

fn fit_row(out: &mut String, condition: ContextCondition, fit: &Result<PowerLawFit, FitError>) {
    match fit {
        Ok(f) => {
            let _ = writeln!(
                out,
                "| {} | {} | [{}, {}] | {:.3} | {} | {:.4} | {} |",
                condition.label(),
                fmt_signed(f.b),
                fmt_signed(f.ci95.0),
                fmt_signed(f.ci95.1),
                f.r_squared,
                fmt_p(f.p_value),
                f.a,
                if f.series_sign < 0 { "−" } else { "+" },
            );
        }
        Err(e) => {
            let _ = writeln!(out, "| {} | n/a | n/a | n/a | n/a | n/a | {} |", condition.label(), e);
        }
    }
}

fn render_markdown(input: &ReportInput<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Contextual entrainment scaling report: {}\n", input.family);

    let mut models: Vec<(&str, u64)> = Vec::new();
    for a in input.aggregates {
        if !models.iter().any(|(m, _)| *m == a.model) {
            models.push((&a.model, a.param_count));
        }
    }
    models.sort_by_key(|&(m, n)| (n, m));
    if !models.is_empty() {
        let _ = writeln!(out, "Models ({}):", models.len());
        for (m, n) in &models {
            let _ = writeln!(out, "- `{m}` (N = {n})");
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Power-law fits\n");
    let _ = writeln!(
        out,
        "Fits of log10|E| on log10 N; b is the exponent, the interval is 95%.\n"
    );
    let mut metrics: Vec<Metric> = Vec::new();
    for f in input.fits {
        if !metrics.contains(&f.metric) {
            metrics.push(f.metric);
        }
    }
    for metric in metrics {
        let _ = writeln!(out, "### {} (`{}`)\n", metric.label(), metric);
        let _ = writeln!(out, "| Condition | b | 95% CI | R² | p | a | sign |");
        let _ = writeln!(out, "|---|---|---|---|---|---|---|");
        for f in input.fits.iter().filter(|f| f.metric == metric) {
            fit_row(&mut out, f.condition, &f.result);
        }
        out.push('\n');
    }

    if let Some(b) = input.baselines {
        let t = &b.thresholds;
        let _ = writeln!(out, "## No-context baselines\n");
        let _ = writeln!(
            out,
            "Gold passes when R² > {} and b in [{}, {}]. Distractor is non-scaling when R² < {} or p > {}.\n",
            t.gold_r2_min, t.gold_b_band.0, t.gold_b_band.1, t.dstr_r2_max, t.dstr_p_min
        );
        let _ = writeln!(
            out,
            "| Condition | gold b | gold R² | gold pass | distractor b | distractor R² | distractor p | non-scaling |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
        for e in &b.entries {
            let gold = match &e.gold_no {
                Some(f) => format!("{} | {:.3}", fmt_signed(f.b), f.r_squared),
                None => format!("n/a | {}", e.gold_error.as_deref().unwrap_or("")),
            };
            let dstr = match &e.dstr_no {
                Some(f) => format!("{} | {:.3} | {}", fmt_signed(f.b), f.r_squared, fmt_p(f.p_value)),
                None => format!("n/a | n/a | {}", e.dstr_error.as_deref().unwrap_or("")),
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                e.condition.label(),
                gold,
                yes_no(e.gold_pass),
                dstr,
                yes_no(e.dstr_non_scaling)
            );
        }
        out.push('\n');
    }

    if let Some((metric, s)) = input.sign_split {
        let _ = writeln!(out, "## Sign split ({})\n", metric.label());
        let _ = writeln!(out, "| Condition | group | b | 95% CI | excludes zero |");
        let _ = writeln!(out, "|---|---|---|---|---|");
        for e in &s.entries {
            let group = match e.group {
                crate::scaling::ContextGroup::Semantic => "semantic",
                crate::scaling::ContextGroup::NonSemantic => "non-semantic",
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | [{}, {}] | {} |",
                e.condition.label(),
                group,
                fmt_signed(e.fit.b),
                fmt_signed(e.fit.ci95.0),
                fmt_signed(e.fit.ci95.1),
                yes_no(e.excludes_zero)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "- semantic intervals below zero: {}", yes_no(s.semantic_negative));
        let _ = writeln!(
            out,
            "- non-semantic intervals above zero: {}",
            yes_no(s.non_semantic_positive)
        );
        let _ = writeln!(out, "- groups separated: {}", yes_no(s.groups_separated));
        let _ = writeln!(
            out,
            "- verdict: {}\n",
            if s.holds() {
                "sign split holds"
            } else {
                "sign split does not hold"
            }
        );
    }

    if !input.trajectories.is_empty() {
        let _ = writeln!(out, "## Gold vs distractor gap\n");
        let _ = writeln!(
            out,
            "Gap = mean Δ distractor − mean Δ gold; positive favours the distractor.\n"
        );
        let _ = writeln!(
            out,
            "| Condition | first gap | last gap | ratio first/last | direction | change |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for t in input.trajectories {
            let first = &t.points[0];
            let last = &t.points[t.points.len() - 1];
            let ratio = t.ratio_first_to_last.map_or("n/a".to_string(), |r| format!("{r:.1}"));
            let _ = writeln!(
                out,
                "| {} | {:.2} ({}) | {:.2} ({}) | {} | {} | {}{} |",
                t.condition.label(),
                first.gap,
                first.model,
                last.gap,
                last.model,
                ratio,
                t.direction,
                t.describe(),
                if t.direction == GapDirection::SignCrossing {
                    ""
                } else {
                    "[^r]"
                }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "[^r]: Ratios and change factors are rounded to one decimal place, so a factor of 6.07 is shown as 6.1.\n"
        );
    }

    if let Some(h) = input.heatmap {
        let _ = writeln!(out, "## Mean Δ distractor by condition and size\n");
        let mut header = "| Condition |".to_string();
        let mut rule = "|---|".to_string();
        for c in &h.columns {
            let _ = write!(header, " {} |", c.model);
            rule.push_str("---|");
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for (cond, row) in h.rows.iter().zip(&h.cells) {
            let _ = write!(out, "| {} |", cond.label());
            for v in row {
                let _ = write!(out, " {v:.2} |");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Plot data for one condition: observed points, fitted line and the 95%
/// confidence band of the mean response, all in log10 space.
fn loglog_csv(series: &[&SeriesFit]) -> String {
    let mut out = String::from("metric,model_n,x_log10_n,y_log10_abs,fit,band_lo,band_hi\n");
    for s in series {
        let xs: Vec<f64> = s.points.iter().map(|p| (p.n as f64).log10()).collect();
        let k = xs.len() as f64;
        let x_mean = xs.iter().sum::<f64>() / k;
        let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
        for (p, &x) in s.points.iter().zip(&xs) {
            let y = if p.value != 0.0 && p.value.is_finite() {
                p.value.abs().log10().to_string()
            } else {
                String::new()
            };
            match &s.result {
                Ok(f) => {
                    let fit = f.predict_log10(x);
                    // half-width of the mean-response band: crit·s·sqrt(1/k + (x − x̄)²/Sxx),
                    // with crit·s recovered from crit·se_b·sqrt(Sxx).
                    let crit_se_b = f.ci95.1 - f.b;
                    let half = crit_se_b * (sxx / k + (x - x_mean).powi(2)).sqrt();
                    let _ = writeln!(out, "{},{},{x},{y},{fit},{},{}", s.metric, p.n, fit - half, fit + half);
                }
                Err(_) => {
                    let _ = writeln!(out, "{},{},{x},{y},,,", s.metric, p.n);
                }
            }
        }
    }
    out
}

fn trajectory_csv(t: &GapTrajectory) -> String {
    let mut out = String::from("model,param_count,x_log10_n,delta_gold,delta_dstr,gap\n");
    for p in &t.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.model,
            p.param_count,
            (p.param_count as f64).log10(),
            p.delta_gold,
            p.delta_dstr,
            p.gap
        );
    }
    out
}

fn loglog_svg(s: &SeriesFit) -> Option<String> {
    let fit = s.result.as_ref().ok()?;
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let pts: Vec<(f64, f64)> = s
        .points
        .iter()
        .map(|p| ((p.n as f64).log10(), p.value.abs().log10()))
        .collect();
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    let ys = pts
        .iter()
        .map(|p| p.1)
        .chain([fit.predict_log10(x0), fit.predict_log10(x1)]);
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / span(y0, y1) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="20" font-size="12">{} {} b={:.3} R2={:.3}</text>"#,
        s.condition, s.metric, fit.b, fit.r_squared
    );
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#,
        H - PAD
    );
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue"/>"#,
        sx(x0),
        sy(fit.predict_log10(x0)),
        sx(x1),
        sy(fit.predict_log10(x1))
    );
    for (x, y) in pts {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="darkred"/>"#,
            sx(x),
            sy(y)
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}
