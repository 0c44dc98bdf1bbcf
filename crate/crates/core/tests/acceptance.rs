//! One test per acceptance criterion. Each prints a single `criterion N: PASS|FAIL` line.
//!
//! Expected values are recomputed here from the raw fixture columns with a
//! hand-written least-squares oracle (uncentered normal equations and tabulated
//! t critical values), independent of the library's fitting code.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::time::Instant;

use entrain::analysis::GapDirection;
use entrain::backend::{probe_model, write_records_jsonl, BackendConfig, MockBackend, ModelSpec, RunOptions};
use entrain::fixtures::{example_relations, random_words, Family, CEREBRAS_CSV, PYTHIA_CSV};
use entrain::metrics::{aggregate, Metric};
use entrain::pipeline::{analyze, AnalysisConfig, FamilyAnalysis};
use entrain::probe::{generate_probes, render_prompts, ProbeInstance};
use entrain::scaling::{fit_power_law, validate_baselines, BaselineThresholds, FitOptions, SeriesPoint};
use entrain::stats::{student_t_cdf, student_t_quantile};
use entrain::{ContextCondition, FitError};

use ContextCondition::{Counterfactual, Irrelevant, Random, Related};

const B_TOL: f64 = 0.02;
const R2_TOL: f64 = 0.03;
const RATIO_TOL: f64 = 0.2;

/// Written to the stderr handle directly so the line survives libtest's capture.
fn verdict(id: u8, name: &str, failures: &[String]) {
    let line = if failures.is_empty() {
        format!("criterion {id}: PASS  {name}\n")
    } else {
        format!("criterion {id}: FAIL  {name}: {}\n", failures.join("; "))
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(failures.is_empty(), "criterion {id} failed: {failures:?}");
}

// ---- independent oracle ----

struct Row {
    setting: String,
    n: f64,
    dstr_no: f64,
    dstr_with: f64,
    gold_no: f64,
    gold_with: f64,
}

fn parse_rows(csv: &str) -> Vec<Row> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            let f = |i: usize| c[i].trim().parse::<f64>().unwrap();
            Row {
                setting: c[0].to_string(),
                n: f(2),
                dstr_no: f(3),
                dstr_with: f(4),
                gold_no: f(5),
                gold_with: f(6),
            }
        })
        .collect()
}

/// Two-sided 97.5% t quantiles from a printed table, df 1..=10.
const T975: [f64; 10] = [
    12.706_204_736,
    4.302_652_730,
    3.182_446_305,
    2.776_445_105,
    2.570_581_836,
    2.446_911_851,
    2.364_624_252,
    2.306_004_135,
    2.262_157_163,
    2.228_138_852,
];

struct OracleFit {
    b: f64,
    r2: f64,
    lo: f64,
    hi: f64,
}

/// Solves [[k, Σx], [Σx, Σx²]]·[c, b] = [Σy, Σxy] by Cramer's rule.
fn oracle(points: &[(f64, f64)]) -> OracleFit {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().log10()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = k * sxx - sx * sx;
    let b = (k * sxy - sx * sy) / det;
    let c = (sy * sxx - sx * sxy) / det;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - c - b * x).powi(2)).sum();
    let ybar = sy / k;
    let sst: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let df = points.len() - 2;
    let se = (sse / df as f64 / (sxx - sx * sx / k)).sqrt();
    let half = T975[df - 1] * se;
    OracleFit {
        b,
        r2: 1.0 - sse / sst,
        lo: b - half,
        hi: b + half,
    }
}

fn oracle_series(rows: &[Row], setting: &str, value: impl Fn(&Row) -> f64) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.setting == setting)
        .map(|r| (r.n, value(r)))
        .collect()
}

fn delta_dstr(r: &Row) -> f64 {
    r.dstr_with - r.dstr_no
}

fn delta_overall(r: &Row) -> f64 {
    (r.gold_with - r.gold_no) - (r.dstr_with - r.dstr_no)
}

fn analysis(family: Family) -> FamilyAnalysis {
    let replay = family.replay();
    analyze(
        family.name(),
        &replay.records(),
        &family.models(),
        &AnalysisConfig::default(),
    )
    .unwrap()
}

/// (condition, b, optional (R², CI)) as printed.
type Published = (ContextCondition, f64, Option<(f64, (f64, f64))>);

/// Library fit vs oracle (1e-9) and vs published values (b ±0.02, sign, R² ±0.03, CI overlap).
fn check_fits(
    failures: &mut Vec<String>,
    fam: &FamilyAnalysis,
    rows: &[Row],
    metric: Metric,
    value: fn(&Row) -> f64,
    published: &[Published],
) {
    for &(condition, b_pub, extra) in published {
        let o = oracle(&oracle_series(rows, condition.as_str(), value));
        let Some(f) = fam.fit(metric, condition) else {
            failures.push(format!("{condition}: not fitted"));
            continue;
        };
        if (f.b - o.b).abs() > 1e-9 || (f.r_squared - o.r2).abs() > 1e-9 || (f.ci95.0 - o.lo).abs() > 1e-6 {
            failures.push(format!(
                "{condition}: library b={} disagrees with oracle b={}",
                f.b, o.b
            ));
        }
        if (o.b - b_pub).abs() > B_TOL || o.b.signum() != b_pub.signum() {
            failures.push(format!("{condition}: b={:+.4} vs published {b_pub:+.3}", o.b));
        }
        if let Some((r2_pub, (lo_pub, hi_pub))) = extra {
            if (o.r2 - r2_pub).abs() > R2_TOL {
                failures.push(format!("{condition}: R²={:.4} vs published {r2_pub:.3}", o.r2));
            }
            if !(o.lo <= hi_pub && lo_pub <= o.hi) {
                failures.push(format!(
                    "{condition}: CI [{:.3}, {:.3}] misses [{lo_pub}, {hi_pub}]",
                    o.lo, o.hi
                ));
            }
        }
    }
}

#[test]
fn criterion_1_cerebras_delta_dstr_fits() {
    let started = Instant::now();
    let fam = analysis(Family::Cerebras);
    let elapsed = started.elapsed().as_secs_f64();
    let mut failures = Vec::new();
    check_fits(
        &mut failures,
        &fam,
        &parse_rows(CEREBRAS_CSV),
        Metric::DeltaDstr,
        delta_dstr,
        &[
            (Counterfactual, -0.330, Some((0.926, (-0.438, -0.223)))),
            (Related, -0.135, Some((0.977, (-0.159, -0.111)))),
            (Irrelevant, 0.091, Some((0.879, (0.052, 0.130)))),
            (Random, 0.217, Some((0.905, (0.136, 0.298)))),
        ],
    );
    if elapsed >= 1.0 {
        failures.push(format!("took {elapsed:.2} s"));
    }
    verdict(1, "Cerebras Δ_dstr fits", &failures);
}

#[test]
fn criterion_2_cerebras_relative_advantage_fits() {
    let fam = analysis(Family::Cerebras);
    let mut failures = Vec::new();
    check_fits(
        &mut failures,
        &fam,
        &parse_rows(CEREBRAS_CSV),
        Metric::DeltaOverall,
        delta_overall,
        &[
            (Related, -0.514, Some((0.966, (-0.625, -0.403)))),
            (Counterfactual, -0.392, Some((0.835, (-0.593, -0.192)))),
            (Irrelevant, 0.100, Some((0.896, (0.061, 0.139)))),
            (Random, 0.266, Some((0.931, (0.182, 0.349)))),
        ],
    );
    verdict(2, "Cerebras relative-advantage fits", &failures);
}

#[test]
fn criterion_3_pythia_delta_dstr_fits() {
    let fam = analysis(Family::Pythia);
    let rows = parse_rows(PYTHIA_CSV);
    let mut failures = Vec::new();
    check_fits(
        &mut failures,
        &fam,
        &rows,
        Metric::DeltaDstr,
        delta_dstr,
        &[
            (Counterfactual, -0.258, None),
            (Related, -0.089, None),
            (Irrelevant, 0.078, None),
            (Random, 0.156, None),
        ],
    );
    let cf = oracle(&oracle_series(&rows, "counterfactual", delta_dstr));
    if cf.r2 < 0.99 {
        failures.push(format!("counterfactual R²={:.4} < 0.99", cf.r2));
    }
    verdict(3, "Pythia Δ_dstr fits", &failures);
}

#[test]
fn criterion_4_cerebras_gold_baselines() {
    let fam = analysis(Family::Cerebras);
    let rows = parse_rows(CEREBRAS_CSV);
    let mut failures = Vec::new();
    if fam.baselines.entries.len() != 4 {
        failures.push(format!("{} baseline entries", fam.baselines.entries.len()));
    }
    for e in &fam.baselines.entries {
        let o = oracle(&oracle_series(&rows, e.condition.as_str(), |r| r.gold_no));
        let pass = o.r2 > 0.93 && (0.10..=0.16).contains(&o.b);
        if !pass || !e.gold_pass {
            failures.push(format!(
                "{}: b={:+.3} R²={:.3} flag={}",
                e.condition, o.b, o.r2, e.gold_pass
            ));
        }
        // The published band is [+0.129, +0.134]; exponents should sit near it.
        if !(0.12..=0.14).contains(&o.b) {
            failures.push(format!("{}: b={:+.3} far from published band", e.condition, o.b));
        }
    }
    verdict(4, "Cerebras no-context gold baselines", &failures);
}

#[test]
fn criterion_5_sign_split_both_families() {
    let mut failures = Vec::new();
    for (family, csv) in [(Family::Cerebras, CEREBRAS_CSV), (Family::Pythia, PYTHIA_CSV)] {
        let fam = analysis(family);
        let rows = parse_rows(csv);
        let ci: BTreeMap<ContextCondition, (f64, f64)> = ContextCondition::ALL
            .iter()
            .map(|&c| {
                let o = oracle(&oracle_series(&rows, c.as_str(), delta_dstr));
                (c, (o.lo, o.hi))
            })
            .collect();
        let sem_hi = ci[&Related].1.max(ci[&Counterfactual].1);
        let non_lo = ci[&Irrelevant].0.min(ci[&Random].0);
        let expected = sem_hi < 0.0 && non_lo > 0.0 && sem_hi < non_lo;
        let split = fam.sign_split.as_ref().expect("sign split computed");
        if !expected || !split.holds() {
            failures.push(format!(
                "{}: oracle {expected}, library {} (semantic hi {sem_hi:.3}, non-semantic lo {non_lo:.3})",
                family.name(),
                split.holds()
            ));
        }
    }
    verdict(5, "sign split in both families", &failures);
}

#[test]
fn criterion_6_gap_trajectories() {
    let fam = analysis(Family::Cerebras);
    let rows = parse_rows(CEREBRAS_CSV);
    let mut failures = Vec::new();
    for (condition, factor, direction) in [
        (Related, 10.3, GapDirection::Convergent),
        (Random, 3.0, GapDirection::Divergent),
        (Counterfactual, 6.1, GapDirection::Convergent),
    ] {
        let gaps: Vec<f64> = rows
            .iter()
            .filter(|r| r.setting == condition.as_str())
            .map(|r| (r.dstr_with - r.dstr_no) - (r.gold_with - r.gold_no))
            .collect();
        let (first, last) = (gaps[0], gaps[gaps.len() - 1]);
        let oracle_factor = if first.abs() > last.abs() {
            first / last
        } else {
            last / first
        };
        let t = fam.trajectory(condition).unwrap();
        let lib_factor = t.change_factor().unwrap();
        if (oracle_factor - factor).abs() > RATIO_TOL
            || (lib_factor - oracle_factor).abs() > 1e-12
            || t.direction != direction
        {
            failures.push(format!(
                "{condition}: oracle {oracle_factor:.3}×, library {lib_factor:.3}× {} (want {factor}× {direction})",
                t.direction
            ));
        }
    }
    verdict(6, "Cerebras gap trajectories", &failures);
}

// ---- criterion 7 ----

/// Γ(df/2) and Γ((df+1)/2) in closed form for integer df, independent of the library's ln Γ.
fn half_gamma(twice: u32) -> f64 {
    // Γ(m/2): Γ(1/2) = √π, Γ(1) = 1, Γ(z + 1) = z·Γ(z).
    let (mut z, mut g) = if twice.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while (2.0 * z) < twice as f64 {
        g *= z;
        z += 1.0;
    }
    g
}

fn oracle_pdf(t: f64, df: u32) -> f64 {
    let v = df as f64;
    half_gamma(df + 1) / ((v * std::f64::consts::PI).sqrt() * half_gamma(df)) * (1.0 + t * t / v).powf(-(v + 1.0) / 2.0)
}

fn oracle_cdf(t: f64, df: u32) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let steps = 20_000;
    let h = t / steps as f64;
    let mut acc = oracle_pdf(0.0, df) + oracle_pdf(t, df);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * oracle_pdf(i as f64 * h, df);
    }
    0.5 + acc * h / 3.0
}

struct Lcg(u64);

impl Lcg {
    fn unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn criterion_7_fit_properties() {
    let mut failures = Vec::new();
    let ns = [111e6, 256e6, 590e6, 1.3e9, 2.7e9, 6.7e9, 13e9].map(|n: f64| n as u64);

    let clean: Vec<SeriesPoint> = ns
        .iter()
        .map(|&n| SeriesPoint::new(n, 0.8 * (n as f64).powf(0.217)))
        .collect();
    let f = fit_power_law(&clean).unwrap();
    if ((f.a - 0.8) / 0.8).abs() > 1e-10 || ((f.b - 0.217) / 0.217).abs() > 1e-10 || (f.r_squared - 1.0).abs() > 1e-10 {
        failures.push(format!("noiseless recovery a={} b={}", f.a, f.b));
    }

    let mut rng = Lcg(42);
    let noisy: Vec<SeriesPoint> = ns
        .iter()
        .map(|&n| SeriesPoint::new(n, (n as f64).powf(-0.1) * (1.0 + 0.4 * rng.unit())))
        .collect();
    let base = fit_power_law(&noisy).unwrap();
    for (label, series) in [
        (
            "E×5.5",
            noisy
                .iter()
                .map(|p| SeriesPoint::new(p.n, p.value * 5.5))
                .collect::<Vec<_>>(),
        ),
        (
            "N×4",
            noisy.iter().map(|p| SeriesPoint::new(p.n * 4, p.value)).collect(),
        ),
    ] {
        let g = fit_power_law(&series).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        if rel(g.b, base.b) > 1e-12
            || rel(g.se_b, base.se_b) > 1e-12
            || rel(g.r_squared, base.r_squared) > 1e-12
            || rel(g.p_value, base.p_value) > 1e-12
        {
            failures.push(format!("{label} changed inference"));
        }
    }

    let mut incoherent = 0;
    for _ in 0..1000 {
        let slope = 0.6 * rng.unit() - 0.3;
        let noise = 0.5 * rng.unit() + 0.01;
        let series: Vec<SeriesPoint> = ns
            .iter()
            .map(|&n| SeriesPoint::new(n, (n as f64).powf(slope) * (noise * (2.0 * rng.unit() - 1.0)).exp()))
            .collect();
        let f = fit_power_law(&series).unwrap();
        let zero_inside = f.ci95.0 <= 0.0 && 0.0 <= f.ci95.1;
        if (f.p_value < 0.05) == zero_inside {
            incoherent += 1;
        }
    }
    if incoherent > 0 {
        failures.push(format!("{incoherent}/1000 series with incoherent CI and p"));
    }

    let mut worst: f64 = 0.0;
    for df in 1..=30 {
        for k in 0..=40 {
            let t = k as f64 * 0.25;
            worst = worst.max((student_t_cdf(t, df) - oracle_cdf(t, df)).abs());
        }
        for p in [0.55, 0.75, 0.9, 0.95, 0.975, 0.99] {
            let q = student_t_quantile(p, df);
            if q <= 10.0 {
                worst = worst.max((oracle_cdf(q, df) - p).abs());
            }
        }
    }
    if worst > 1e-6 {
        failures.push(format!("t numerics off by {worst:.2e}"));
    }

    let mixed = [
        SeriesPoint::new(10, 2.0),
        SeriesPoint::new(100, -1.0),
        SeriesPoint::new(1000, 3.0),
    ];
    if fit_power_law(&mixed) != Err(FitError::MixedSign) {
        failures.push("mixed-sign series accepted".into());
    }
    verdict(7, "fit property suite", &failures);
}

// ---- criterion 8 ----

fn mock_pipeline(boost: f64) -> (Vec<u8>, f64, f64, usize) {
    let probes = generate_probes(&example_relations(), Random, 100_000, 11, &random_words()).unwrap();
    let model = ModelSpec {
        name: "mock-7M".into(),
        family: "mock".into(),
        param_count: 7_000_000,
        backend: BackendConfig::Mock { base: 0.25, boost },
    };
    let mock = MockBackend::new(0.25, boost);
    let run = probe_model(
        &model,
        &mock,
        &probes,
        &RunOptions {
            concurrency: 3,
            cache: None,
        },
    );
    assert!(run.failures.is_empty());
    let agg = aggregate(&run.records, &model, Random).unwrap();
    let mut bytes = Vec::new();
    write_records_jsonl(&mut bytes, &run.records).unwrap();
    (bytes, agg.delta_dstr, agg.delta_gold, probes.len())
}

#[test]
fn criterion_8_mock_end_to_end() {
    let boost = 1.75;
    let (first, dstr, gold, n) = mock_pipeline(boost);
    let (second, _, _, _) = mock_pipeline(boost);
    let mut failures = Vec::new();
    if n == 0 {
        failures.push("no probes".into());
    }
    if dstr != boost {
        failures.push(format!("mean Δ_dstr {dstr} != {boost}"));
    }
    if gold != 0.0 {
        failures.push(format!("mean Δ_gold {gold} != 0"));
    }
    if first != second {
        failures.push("double run differs".into());
    }
    verdict(8, "end-to-end mock run", &failures);
}

// ---- criterion 9 ----

fn check_probe(p: &ProbeInstance) -> Result<(), String> {
    let relations = example_relations();
    let rel = relations
        .iter()
        .find(|r| r.id == p.relation_id)
        .ok_or("unknown relation")?;
    if p.gold == p.distractor || !p.context_text.contains(&p.distractor) || !p.context_text.ends_with('.') {
        return Err("basic invariant".into());
    }
    let (with, without) = render_prompts(p);
    if without != p.query_text || with != format!("{} {}", p.context_text, p.query_text) {
        return Err("prompt rendering".into());
    }
    // Recover the query's subject by reversing the template.
    let sample = rel
        .samples
        .iter()
        .find(|s| {
            let t = s.prompt_template.as_deref().unwrap_or(&rel.prompt_template);
            s.object == p.gold && t.replace("{subject}", &s.subject).trim_end() == p.query_text
        })
        .ok_or("query not from relation")?;
    let statement = |subject: &str, object: &str, own: Option<&str>| {
        let t = rel.context_template.as_deref().or(own).unwrap_or(&rel.prompt_template);
        format!("{} {object}.", t.replace("{subject}", subject).trim_end())
    };
    let ok = match p.condition {
        Counterfactual => {
            p.context_text == statement(&sample.subject, &p.distractor, sample.prompt_template.as_deref())
                && rel
                    .samples
                    .iter()
                    .any(|s| s.object == p.distractor && s.subject != sample.subject)
        }
        Related => rel.samples.iter().any(|s| {
            s.subject != sample.subject
                && s.object == p.distractor
                && p.context_text == statement(&s.subject, &s.object, s.prompt_template.as_deref())
        }),
        Irrelevant => relations.iter().any(|r| {
            r.id != rel.id
                && r.samples
                    .iter()
                    .any(|s| s.object == p.distractor && p.context_text.ends_with(&format!(" {}.", s.object)))
        }),
        Random => {
            p.context_text == format!("{}.", p.distractor)
                && p.distractor.chars().next().is_some_and(char::is_uppercase)
                && random_words().iter().any(|w| w.eq_ignore_ascii_case(&p.distractor))
        }
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{} invariant", p.condition))
    }
}

#[test]
fn criterion_9_generator_conformance() {
    let relations = example_relations();
    let vocab = random_words();
    let mut failures = Vec::new();
    let mut contexts: BTreeMap<ContextCondition, Vec<String>> = BTreeMap::new();
    for condition in ContextCondition::ALL {
        let probes = generate_probes(&relations, condition, 100_000, 3, &vocab).unwrap();
        if probes.is_empty() {
            failures.push(format!("{condition}: no probes"));
        }
        for p in &probes {
            if let Err(e) = check_probe(p) {
                failures.push(format!("{}: {e}: {:?}", p.id, p.context_text));
            }
        }
        contexts.insert(condition, probes.into_iter().map(|p| p.context_text).collect());
    }
    for s in [
        "The capital of Germany is Munich.",
        "Sushi is a traditional dish from China.",
        "The CEO of Tesla is Tim Cook.",
        "The Colosseum is located in Athens.",
        "On the outside, lemons are green.",
    ] {
        if !contexts[&Counterfactual].iter().any(|c| c == s) {
            failures.push(format!("missing counterfactual {s:?}"));
        }
    }
    for s in [
        "The capital of France is Paris.",
        "Tacos are a traditional dish from Mexico.",
        "The CEO of Amazon is Andy Jassy.",
        "The Louvre is located in Paris.",
        "On the outside, oranges are orange.",
    ] {
        if !contexts[&Related].iter().any(|c| c == s) {
            failures.push(format!("missing related {s:?}"));
        }
    }
    verdict(9, "generator conformance on example relations", &failures);
}

#[test]
fn reproduce_command_agrees() {
    let summary = entrain::reproduce::reproduce();
    for c in &summary.checks {
        println!(
            "reproduce check {}: {} {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    assert_eq!(summary.checks.len(), 9);
    assert!(summary.all_passed());
}

#[test]
fn distractor_no_context_scaling_is_reported_honestly() {
    // Not an acceptance criterion: the counterfactual distractor baseline in this
    // fixture does scale (R² ≈ 0.83), so "non-scaling" must come out false there.
    let replay = Family::Cerebras.replay();
    let aggs = entrain::metrics::aggregate_all(&replay.records(), &Family::Cerebras.models());
    let report = validate_baselines(&aggs, &BaselineThresholds::default(), &FitOptions::default());
    let cf = report.entries.iter().find(|e| e.condition == Counterfactual).unwrap();
    assert!(!cf.dstr_non_scaling);
    let related = report.entries.iter().find(|e| e.condition == Related).unwrap();
    assert!(related.dstr_non_scaling);
}
