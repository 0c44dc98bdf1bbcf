//! Self-contained reproduction checks over the bundled fixtures.
//!
//! Each check returns a verdict plus a one-line detail so the CLI can print a
//! pass/fail table or JSON without re-deriving anything.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::GapDirection;
use crate::backend::{probe_model, write_records_jsonl, BackendConfig, MockBackend, ModelSpec, RunOptions};
use crate::condition::ContextCondition;
use crate::error::FitError;
use crate::fixtures::{example_relations, random_words, replay_from_csv, CEREBRAS_CSV, PYTHIA_CSV};
use crate::metrics::{aggregate, write_aggregates_csv, Metric};
use crate::pipeline::{analyze, AnalysisConfig, FamilyAnalysis};
use crate::probe::{check_invariants, generate_probes, write_probes_jsonl};
use crate::scaling::{fit_power_law, SeriesPoint};
use crate::stats::{student_t_cdf, student_t_pdf, student_t_quantile};

/// Published exponent, R² and 95% interval for one condition.
#[derive(Debug, Clone, Copy)]
pub struct Expected {
    pub condition: ContextCondition,
    pub b: f64,
    pub r2: f64,
    pub ci: (f64, f64),
}

const fn exp(condition: ContextCondition, b: f64, r2: f64, lo: f64, hi: f64) -> Expected {
    Expected {
        condition,
        b,
        r2,
        ci: (lo, hi),
    }
}

use ContextCondition::{Counterfactual, Irrelevant, Random, Related};

pub const CEREBRAS_DELTA_DSTR: [Expected; 4] = [
    exp(Related, -0.135, 0.977, -0.159, -0.111),
    exp(Irrelevant, 0.091, 0.879, 0.052, 0.130),
    exp(Random, 0.217, 0.905, 0.136, 0.298),
    exp(Counterfactual, -0.330, 0.926, -0.438, -0.223),
];

pub const CEREBRAS_DELTA_OVERALL: [Expected; 4] = [
    exp(Related, -0.514, 0.966, -0.625, -0.403),
    exp(Irrelevant, 0.100, 0.896, 0.061, 0.139),
    exp(Random, 0.266, 0.931, 0.182, 0.349),
    exp(Counterfactual, -0.392, 0.835, -0.593, -0.192),
];

pub const PYTHIA_DELTA_DSTR: [Expected; 4] = [
    exp(Related, -0.089, 0.836, -0.143, -0.034),
    exp(Irrelevant, 0.078, 0.938, 0.050, 0.106),
    exp(Random, 0.156, 0.916, 0.091, 0.222),
    exp(Counterfactual, -0.258, 0.998, -0.273, -0.244),
];

pub const B_TOL: f64 = 0.02;
pub const R2_TOL: f64 = 0.03;
pub const RATIO_TOL: f64 = 0.2;

/// Strings a Counterfactual probe set over the example relations must contain.
pub const COUNTERFACTUAL_EXAMPLES: [&str; 5] = [
    "The capital of Germany is Munich.",
    "Sushi is a traditional dish from China.",
    "The CEO of Tesla is Tim Cook.",
    "The Colosseum is located in Athens.",
    "On the outside, lemons are green.",
];

/// Strings a Related probe set over the example relations must contain.
pub const RELATED_EXAMPLES: [&str; 5] = [
    "The capital of France is Paris.",
    "Tacos are a traditional dish from Mexico.",
    "The CEO of Amazon is Andy Jassy.",
    "The Louvre is located in Paris.",
    "On the outside, oranges are orange.",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproduceSummary {
    pub checks: Vec<Check>,
}

impl ReproduceSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: u8) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Collects sub-results of one check; the first failure becomes the detail.
struct Verdict {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            notes: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(self, id: u8, name: &str) -> Check {
        let passed = self.failures.is_empty();
        let detail = if passed {
            self.notes.join("; ")
        } else {
            format!("FAILED: {}", self.failures.join("; "))
        };
        Check {
            id,
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn family(name: &str, csv: &str) -> Result<FamilyAnalysis, String> {
    let replay = replay_from_csv(csv, name).map_err(|e| e.to_string())?;
    let models = replay.models(Some(name));
    analyze(name, &replay.records(), &models, &AnalysisConfig::default()).map_err(|e| e.to_string())
}

fn compare_fits(v: &mut Verdict, fam: &FamilyAnalysis, metric: Metric, expected: &[Expected], with_r2: bool) {
    for e in expected {
        let Some(f) = fam.fit(metric, e.condition) else {
            v.expect(false, format!("{}: no fit", e.condition));
            continue;
        };
        let b_ok = (f.b - e.b).abs() <= B_TOL && f.b.signum() == e.b.signum();
        let r2_ok = !with_r2 || (f.r_squared - e.r2).abs() <= R2_TOL;
        let ci_ok = !with_r2 || (f.ci95.0 <= e.ci.1 && e.ci.0 <= f.ci95.1);
        v.expect(
            b_ok && r2_ok && ci_ok,
            format!(
                "{} b={:+.3} (want {:+.3}) R²={:.3} (want {:.3}) CI=[{:+.3}, {:+.3}]",
                e.condition, f.b, e.b, f.r_squared, e.r2, f.ci95.0, f.ci95.1
            ),
        );
    }
}

/// Run every check on the bundled fixtures.
pub fn reproduce() -> ReproduceSummary {
    reproduce_with(CEREBRAS_CSV, PYTHIA_CSV)
}

/// Same checks over caller-supplied Cerebras and Pythia tables.
pub fn reproduce_with(cerebras_csv: &str, pythia_csv: &str) -> ReproduceSummary {
    let started = Instant::now();
    let cerebras = family("cerebras", cerebras_csv);
    let cerebras_elapsed = started.elapsed();
    let pythia = family("pythia", pythia_csv);

    let mut checks = Vec::new();
    let data_error = |id: u8, name: &str, e: &str| Check {
        id,
        name: name.to_string(),
        passed: false,
        detail: format!("FAILED: {e}"),
    };

    let name = "Cerebras Δ_dstr power-law fits";
    checks.push(match &cerebras {
        Ok(fam) => {
            let mut v = Verdict::new();
            compare_fits(&mut v, fam, Metric::DeltaDstr, &CEREBRAS_DELTA_DSTR, true);
            v.expect(
                cerebras_elapsed.as_secs_f64() < 1.0,
                format!("analysis took {:.1} ms", cerebras_elapsed.as_secs_f64() * 1e3),
            );
            v.finish(1, name)
        }
        Err(e) => data_error(1, name, e),
    });

    let name = "Cerebras relative-advantage fits";
    checks.push(match &cerebras {
        Ok(fam) => {
            let mut v = Verdict::new();
            compare_fits(&mut v, fam, Metric::DeltaOverall, &CEREBRAS_DELTA_OVERALL, true);
            v.finish(2, name)
        }
        Err(e) => data_error(2, name, e),
    });

    let name = "Pythia Δ_dstr power-law fits";
    checks.push(match &pythia {
        Ok(fam) => {
            let mut v = Verdict::new();
            compare_fits(&mut v, fam, Metric::DeltaDstr, &PYTHIA_DELTA_DSTR, false);
            match fam.fit(Metric::DeltaDstr, Counterfactual) {
                Some(f) => v.expect(
                    f.r_squared >= 0.99,
                    format!("counterfactual R²={:.4} ≥ 0.99", f.r_squared),
                ),
                None => v.expect(false, "counterfactual unfitted".into()),
            }
            v.finish(3, name)
        }
        Err(e) => data_error(3, name, e),
    });

    let name = "Cerebras no-context gold baselines";
    checks.push(match &cerebras {
        Ok(fam) => {
            let mut v = Verdict::new();
            for e in &fam.baselines.entries {
                let desc = match &e.gold_no {
                    Some(f) => format!("{} b={:+.3} R²={:.3}", e.condition, f.b, f.r_squared),
                    None => format!("{}: {}", e.condition, e.gold_error.as_deref().unwrap_or("unfitted")),
                };
                v.expect(e.gold_pass, desc);
            }
            v.expect(
                fam.baselines.entries.len() == 4,
                format!("{} conditions", fam.baselines.entries.len()),
            );
            v.finish(4, name)
        }
        Err(e) => data_error(4, name, e),
    });

    let name = "Sign split in both families";
    checks.push({
        let mut v = Verdict::new();
        for fam in [&cerebras, &pythia] {
            match fam {
                Ok(fam) => match &fam.sign_split {
                    Some(s) => v.expect(
                        s.holds(),
                        format!(
                            "{}: semantic<0 {} non-semantic>0 {} separated {}",
                            fam.family, s.semantic_negative, s.non_semantic_positive, s.groups_separated
                        ),
                    ),
                    None => v.expect(false, format!("{}: sign split not computable", fam.family)),
                },
                Err(e) => v.expect(false, e.clone()),
            }
        }
        v.finish(5, name)
    });

    let name = "Cerebras gap trajectories";
    checks.push(match &cerebras {
        Ok(fam) => {
            let mut v = Verdict::new();
            for (condition, factor, direction) in [
                (Related, 10.3, GapDirection::Convergent),
                (Random, 3.0, GapDirection::Divergent),
                (Counterfactual, 6.1, GapDirection::Convergent),
            ] {
                match fam.trajectory(condition) {
                    Some(t) => {
                        let f = t.change_factor().unwrap_or(f64::NAN);
                        v.expect(
                            (f - factor).abs() <= RATIO_TOL && t.direction == direction,
                            format!("{condition} {} (want {factor:.1}×, {direction})", t.describe()),
                        );
                    }
                    None => v.expect(false, format!("{condition}: no trajectory")),
                }
            }
            v.finish(6, name)
        }
        Err(e) => data_error(6, name, e),
    });

    checks.push(property_checks());
    checks.push(mock_end_to_end());
    checks.push(generator_conformance());
    ReproduceSummary { checks }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// CDF by composite Simpson integration of the density from 0 to `t`.
fn integrated_cdf(t: f64, df: u32) -> f64 {
    let steps = 4000;
    let h = t / steps as f64;
    let mut acc = student_t_pdf(0.0, df) + student_t_pdf(t, df);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * student_t_pdf(i as f64 * h, df);
    }
    0.5 + acc * h / 3.0
}

fn property_checks() -> Check {
    let mut v = Verdict::new();
    let ns: Vec<u64> = vec![
        111_000_000,
        256_000_000,
        590_000_000,
        1_300_000_000,
        2_700_000_000,
        6_700_000_000,
        13_000_000_000,
    ];

    let clean: Vec<SeriesPoint> = ns
        .iter()
        .map(|&n| SeriesPoint::new(n, 2.5 * (n as f64).powf(-0.37)))
        .collect();
    match fit_power_law(&clean) {
        Ok(f) => v.expect(
            rel_close(f.a, 2.5, 1e-10) && rel_close(f.b, -0.37, 1e-10) && (f.r_squared - 1.0).abs() < 1e-10,
            "noiseless recovery".into(),
        ),
        Err(e) => v.expect(false, format!("noiseless fit: {e}")),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let noisy: Vec<SeriesPoint> = ns
        .iter()
        .map(|&n| SeriesPoint::new(n, 3.0 * (n as f64).powf(0.2) * (1.0 + rng.random_range(-0.3..0.3))))
        .collect();
    let scaled_e: Vec<SeriesPoint> = noisy.iter().map(|p| SeriesPoint::new(p.n, p.value * 7.3)).collect();
    let scaled_n: Vec<SeriesPoint> = noisy.iter().map(|p| SeriesPoint::new(p.n * 3, p.value)).collect();
    if let (Ok(base), Ok(e), Ok(n)) = (
        fit_power_law(&noisy),
        fit_power_law(&scaled_e),
        fit_power_law(&scaled_n),
    ) {
        let same = |x: &crate::scaling::PowerLawFit| {
            rel_close(x.b, base.b, 1e-12)
                && rel_close(x.se_b, base.se_b, 1e-12)
                && rel_close(x.r_squared, base.r_squared, 1e-12)
                && rel_close(x.p_value, base.p_value, 1e-12)
        };
        v.expect(same(&e) && same(&n), "invariance under scaling of E and N".into());
    } else {
        v.expect(false, "invariance fits failed".into());
    }

    let mut incoherent = 0;
    for _ in 0..1000 {
        let slope = rng.random_range(-0.3..0.3);
        let noise = rng.random_range(0.01..0.5);
        let series: Vec<SeriesPoint> = ns
            .iter()
            .map(|&n| {
                let eps: f64 = rng.random_range(-1.0..1.0);
                SeriesPoint::new(n, (n as f64).powf(slope) * (noise * eps).exp())
            })
            .collect();
        if let Ok(f) = fit_power_law(&series) {
            let zero_inside = f.ci95.0 <= 0.0 && 0.0 <= f.ci95.1;
            if (f.p_value < 0.05) == zero_inside {
                incoherent += 1;
            }
        } else {
            incoherent += 1;
        }
    }
    v.expect(
        incoherent == 0,
        format!("CI/p coherence over 1000 series ({incoherent} incoherent)"),
    );

    let mut worst: f64 = 0.0;
    for df in 1..=30 {
        for k in 0..=20 {
            let t = k as f64 * 0.5;
            worst = worst.max((student_t_cdf(t, df) - integrated_cdf(t, df)).abs());
        }
        for p in [0.6, 0.9, 0.975, 0.995] {
            let q = student_t_quantile(p, df);
            if q <= 10.0 {
                worst = worst.max((integrated_cdf(q, df) - p).abs());
            }
        }
    }
    v.expect(worst < 1e-6, format!("t numerics vs integration (max err {worst:.1e})"));

    let mixed = [
        SeriesPoint::new(10, 1.0),
        SeriesPoint::new(100, -1.0),
        SeriesPoint::new(1000, 2.0),
    ];
    v.expect(
        fit_power_law(&mixed) == Err(FitError::MixedSign),
        "mixed-sign rejection".into(),
    );
    v.finish(7, "Fit property suite")
}

/// Boost handed to the mock backend for the end-to-end check.
pub const MOCK_BOOST: f64 = 2.5;

fn mock_run_bytes(seed: u64) -> Result<(Vec<u8>, f64, f64), String> {
    let relations = example_relations();
    let probes = generate_probes(&relations, Random, 100_000, seed, &random_words()).map_err(|e| e.to_string())?;
    let model = ModelSpec {
        name: "mock-1M".into(),
        family: "mock".into(),
        param_count: 1_000_000,
        backend: BackendConfig::Mock {
            base: 1.0,
            boost: MOCK_BOOST,
        },
    };
    let mock = MockBackend::new(1.0, MOCK_BOOST);
    let run = probe_model(&model, &mock, &probes, &RunOptions::default());
    if !run.failures.is_empty() {
        return Err(format!("{} probe failures", run.failures.len()));
    }
    let agg = aggregate(&run.records, &model, Random).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    write_probes_jsonl(&mut bytes, &probes).map_err(|e| e.to_string())?;
    write_records_jsonl(&mut bytes, &run.records).map_err(|e| e.to_string())?;
    write_aggregates_csv(&mut bytes, std::slice::from_ref(&agg), None).map_err(|e| e.to_string())?;
    Ok((bytes, agg.delta_dstr, agg.delta_gold))
}

fn mock_end_to_end() -> Check {
    let mut v = Verdict::new();
    match (mock_run_bytes(7), mock_run_bytes(7)) {
        (Ok((a, dstr, gold)), Ok((b, _, _))) => {
            v.expect(dstr == MOCK_BOOST, format!("mean Δ_dstr = {dstr} (boost {MOCK_BOOST})"));
            v.expect(gold == 0.0, format!("mean Δ_gold = {gold}"));
            v.expect(a == b, format!("double run byte-identical ({} bytes)", a.len()));
        }
        (Err(e), _) | (_, Err(e)) => v.expect(false, e),
    }
    v.finish(8, "End-to-end mock run")
}

fn generator_conformance() -> Check {
    let mut v = Verdict::new();
    let relations = example_relations();
    let vocab = random_words();
    for condition in ContextCondition::ALL {
        match generate_probes(&relations, condition, 100_000, 7, &vocab) {
            Ok(probes) => {
                let bad: Vec<String> = probes
                    .iter()
                    .filter_map(|p| check_invariants(p, &relations, &vocab).err().map(|e| e.to_string()))
                    .collect();
                v.expect(
                    bad.is_empty() && !probes.is_empty(),
                    format!(
                        "{condition}: {} probes, {} invalid{}",
                        probes.len(),
                        bad.len(),
                        bad.first().map(|b| format!(" ({b})")).unwrap_or_default()
                    ),
                );
                let wanted: &[&str] = match condition {
                    Counterfactual => &COUNTERFACTUAL_EXAMPLES,
                    Related => &RELATED_EXAMPLES,
                    _ => &[],
                };
                for s in wanted {
                    v.expect(probes.iter().any(|p| p.context_text == *s), format!("contains {s:?}"));
                }
            }
            Err(e) => v.expect(false, format!("{condition}: {e}")),
        }
    }
    v.finish(9, "Generator conformance on example relations")
}
