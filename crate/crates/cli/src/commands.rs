//! Subcommand bodies. Each returns the process exit code on success and an
//! error chain otherwise; [`exit_code`] maps the chain to a status.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use entrain::backend::{
    connect, nominal_param_count, probe_model, write_records_jsonl, BackendConfig, BackendError, LogitCache,
    LogitRecord, ModelSpec, ReplaySource, RunOptions, BACKEND_URL_ENV,
};
use entrain::fixtures::{self, Family};
use entrain::pipeline::{analyze, AnalysisConfig, FamilyAnalysis};
use entrain::probe::{generate_probes, read_probes_jsonl, write_probes_jsonl};
use entrain::relation::{load_relations, load_vocabulary};
use entrain::report::{emit_report, render_fits_csv, render_report, ReportOptions};
use entrain::reproduce::reproduce_with;
use entrain::scaling::Inference;
use entrain::{AnalysisError, DataError, FitError, ValidationError};

use crate::config::RunConfig;
use crate::{Fixture, Format, GlobalArgs};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_TRANSPORT: u8 = 3;
pub const EXIT_DATA_GAP: u8 = 4;
pub const EXIT_STATISTICAL: u8 = 5;

/// First recognised error in the chain decides the status.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<BackendError>() {
            return match e {
                BackendError::Transport { .. } | BackendError::Protocol(_) => EXIT_TRANSPORT,
                BackendError::DataGap { .. } => EXIT_DATA_GAP,
                BackendError::InvalidQuery(_) => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<AnalysisError>() {
            return match e {
                AnalysisError::EmptyGroup { .. } | AnalysisError::IncompleteGrid(_) => EXIT_DATA_GAP,
                AnalysisError::TooFewSizes { .. } | AnalysisError::Fit(_) => EXIT_STATISTICAL,
                AnalysisError::MissingCondition(_) => EXIT_DATA_GAP,
                AnalysisError::Invalid(_) => EXIT_VALIDATION,
            };
        }
        if cause.is::<FitError>() {
            return EXIT_STATISTICAL;
        }
        if cause.is::<ValidationError>() || cause.is::<DataError>() || cause.is::<toml::de::Error>() {
            return EXIT_VALIDATION;
        }
    }
    1
}

/// Config file (if any) with command-line flags applied on top.
fn effective_config(args: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.cap {
        c.cap = v;
    }
    if let Some(v) = args.concurrency {
        c.concurrency = v;
    }
    if let Some(v) = &args.out {
        c.out = Some(v.clone());
    }
    if let Some(v) = &args.cache {
        c.cache_dir = Some(v.clone());
    }
    if let Some(v) = &args.family {
        c.family = Some(v.clone());
    }
    if let Some(v) = &args.relations {
        c.relations_path = Some(v.clone());
    }
    if let Some(v) = &args.vocab {
        c.vocab_path = Some(v.clone());
    }
    if !args.conditions.is_empty() {
        c.conditions = args.conditions.clone();
    }
    c.normal_ci |= args.normal_ci;
    c.svg |= args.svg;
    c.validate()?;
    Ok(c)
}

fn format_of(args: &GlobalArgs) -> Format {
    if args.json {
        Format::Json
    } else {
        args.format.unwrap_or(Format::Md)
    }
}

/// Write through a sibling temp file so readers never see a half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} is not a file path", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn say(line: &str) -> Result<()> {
    writeln!(io::stdout().lock(), "{line}")?;
    Ok(())
}

/// A closed stdout (`entrain ... | head`) is not a failure.
pub fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn emit(out: Option<&Path>, file: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(file);
            write_atomic(&path, bytes)?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

pub fn generate(args: &GlobalArgs) -> Result<ExitCode> {
    let c = effective_config(args)?;
    let relations = match &c.relations_path {
        Some(p) => load_relations(p)?,
        None => fixtures::example_relations(),
    };
    let vocab = match &c.vocab_path {
        Some(p) => load_vocabulary(p)?,
        None => fixtures::random_words(),
    };
    let mut probes = Vec::new();
    let mut counts = Vec::new();
    for condition in c.conditions() {
        let batch = generate_probes(&relations, condition, c.cap, c.seed, &vocab)?;
        counts.push((condition, batch.len()));
        probes.extend(batch);
    }
    let mut buf = Vec::new();
    write_probes_jsonl(&mut buf, &probes)?;
    emit(c.out.as_deref(), "probes.jsonl", &buf)?;
    for (condition, n) in counts {
        eprintln!("{condition}: {n} probes");
    }
    Ok(ExitCode::SUCCESS)
}

fn family_prefix(name: &str) -> String {
    name.split('-').next().unwrap_or(name).to_string()
}

/// Models from the config plus `--model`, with backend flags applied.
fn probe_models(args: &GlobalArgs, c: &RunConfig) -> Result<Vec<ModelSpec>> {
    let mut models = c.models.clone();
    if let Some(name) = &args.model {
        let param_count = args
            .param_count
            .or_else(|| nominal_param_count(name))
            .ok_or_else(|| ValidationError::new(format!("model `{name}` needs --param-count")))?;
        models.push(ModelSpec {
            name: name.clone(),
            family: c.family.clone().unwrap_or_else(|| family_prefix(name)),
            param_count,
            backend: BackendConfig::Mock { base: 0.0, boost: 0.0 },
        });
    }
    let url = args.backend_url.clone().or_else(|| {
        // The environment only stands in for a backend the user did not configure.
        let unconfigured = c.models.is_empty() && args.replay.is_none();
        unconfigured.then(|| std::env::var(BACKEND_URL_ENV).ok()).flatten()
    });
    if let Some(url) = url {
        for m in &mut models {
            let bearer_token = match &m.backend {
                BackendConfig::Endpoint { bearer_token, .. } => bearer_token.clone(),
                _ => None,
            };
            m.backend = BackendConfig::Endpoint {
                url: url.clone(),
                bearer_token,
            };
        }
    } else if let Some(path) = &args.replay {
        if models.is_empty() {
            models = replay_models(&ReplaySource::open(path)?, c.family.as_deref())?;
        }
        for m in &mut models {
            m.backend = BackendConfig::Replay {
                path: path.display().to_string(),
            };
        }
    } else if args.model.is_some() {
        bail!(ValidationError::new(format!(
            "--model needs --backend-url, --replay or {BACKEND_URL_ENV}"
        )));
    }
    if models.is_empty() {
        bail!(ValidationError::new("no models configured"));
    }
    for m in &models {
        m.validate()?;
    }
    Ok(models)
}

/// Model specs for a replay: aggregate CSVs carry sizes, record files rely on name suffixes.
fn replay_models(source: &ReplaySource, family: Option<&str>) -> Result<Vec<ModelSpec>> {
    let models = source.models(family);
    if !models.is_empty() {
        return Ok(models);
    }
    let names: BTreeSet<String> = source.records().into_iter().map(|r| r.model).collect();
    names
        .into_iter()
        .map(|name| {
            let param_count = nominal_param_count(&name).ok_or_else(|| {
                ValidationError::new(format!("cannot tell the size of model `{name}`; list it in the config"))
            })?;
            Ok(ModelSpec {
                family: family.map(str::to_string).unwrap_or_else(|| family_prefix(&name)),
                name,
                param_count,
                backend: BackendConfig::Mock { base: 0.0, boost: 0.0 },
            })
        })
        .collect()
}

pub fn probe(args: &GlobalArgs, probes_path: Option<&Path>) -> Result<ExitCode> {
    let c = effective_config(args)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));

    let Some(probes_path) = probes_path else {
        let Some(replay) = &args.replay else {
            bail!(ValidationError::new(
                "probe needs a probe file, or --replay to copy recorded logits"
            ));
        };
        let records = ReplaySource::open(replay)?.records();
        write_run(&out, &records, &[])?;
        eprintln!("{} records from {}", records.len(), replay.display());
        return Ok(ExitCode::SUCCESS);
    };

    let probes = read_probes_jsonl(probes_path)?;
    let wanted: BTreeSet<_> = c.conditions().into_iter().collect();
    let probes: Vec<_> = probes.into_iter().filter(|p| wanted.contains(&p.condition)).collect();
    let models = probe_models(args, &c)?;
    let cache = c.cache_dir.as_ref().map(LogitCache::open).transpose()?;
    let options = RunOptions {
        concurrency: c.concurrency,
        cache: cache.as_ref(),
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for model in &models {
        let source = connect(model)?;
        let run = probe_model(model, source.as_ref(), &probes, &options);
        eprintln!(
            "{}: {} records, {} failures, {} requests",
            model.name,
            run.records.len(),
            run.failures.len(),
            source.requests_sent()
        );
        records.extend(run.records);
        failures.extend(run.failures);
    }
    write_run(&out, &records, &failures)?;

    // Transport trouble outranks data gaps, which outrank bad queries.
    let worst = ["transport", "protocol", "data_gap", "invalid"]
        .iter()
        .find_map(|kind| failures.iter().find(|f| f.kind == *kind));
    if let Some(f) = worst {
        return Err(anyhow::Error::new(f.error.clone()).context(format!(
            "{} of {} probe runs failed (first: {}); see {}",
            failures.len(),
            failures.len() + records.len(),
            f.probe_id,
            out.join("failures.json").display()
        )));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_run(out: &Path, records: &[LogitRecord], failures: &[entrain::backend::ProbeFailure]) -> Result<()> {
    let mut buf = Vec::new();
    write_records_jsonl(&mut buf, records)?;
    write_atomic(&out.join("records.jsonl"), &buf)?;
    let mut manifest = serde_json::to_vec_pretty(failures)?;
    manifest.push(b'\n');
    write_atomic(&out.join("failures.json"), &manifest)?;
    Ok(())
}

fn analysis_config(c: &RunConfig) -> AnalysisConfig {
    let mut config = AnalysisConfig {
        r2_strong: c.thresholds.r2_strong,
        p_strong: c.thresholds.p_strong,
        ..AnalysisConfig::default()
    };
    if c.normal_ci {
        config.fit.inference = Inference::Normal;
    }
    config
}

/// Load records from a file, `--replay` or a bundled table, then run the analysis.
fn load_and_analyze(
    args: &GlobalArgs,
    c: &RunConfig,
    input: Option<&Path>,
    fixture: Option<Fixture>,
) -> Result<FamilyAnalysis> {
    let (source, default_family) = match (input.or(args.replay.as_deref()), fixture) {
        (_, Some(f)) => {
            let family = match f {
                Fixture::Cerebras => Family::Cerebras,
                Fixture::Pythia => Family::Pythia,
            };
            (family.replay(), Some(family.name().to_string()))
        }
        (Some(path), None) => (ReplaySource::open(path)?, None),
        (None, None) => bail!(ValidationError::new(
            "no input: pass a records file, --replay or --fixture"
        )),
    };
    let family = c.family.clone().or(default_family);
    let models = if c.models.is_empty() {
        replay_models(&source, family.as_deref())?
    } else {
        c.models.clone()
    };
    let family = family
        .or_else(|| models.first().map(|m| m.family.clone()))
        .unwrap_or_else(|| "unknown".into());
    let records = source.records();
    let wanted: BTreeSet<_> = c.conditions().into_iter().collect();
    let records: Vec<_> = records.into_iter().filter(|r| wanted.contains(&r.condition)).collect();
    analyze(&family, &records, &models, &analysis_config(c)).with_context(|| format!("analysing {family}"))
}

pub fn fit(args: &GlobalArgs, input: Option<&Path>, fixture: Option<Fixture>) -> Result<ExitCode> {
    let c = effective_config(args)?;
    let analysis = load_and_analyze(args, &c, input, fixture)?;
    let report_input = analysis.report_input();
    let (file, bytes) = match format_of(args) {
        Format::Csv => (
            "fits.csv",
            render_fits_csv(&analysis.family, &analysis.fits).into_bytes(),
        ),
        format => {
            let mut files = render_report(&report_input, &ReportOptions::default())?;
            let (name, file) = if format == Format::Json {
                ("fits.json", "fits.json")
            } else {
                ("report.md", "fits.md")
            };
            (file, files.remove(name).expect("rendered"))
        }
    };
    emit(c.out.as_deref(), file, &bytes)?;
    Ok(ExitCode::SUCCESS)
}

pub fn report(args: &GlobalArgs, input: Option<&Path>, fixture: Option<Fixture>) -> Result<ExitCode> {
    let c = effective_config(args)?;
    let analysis = load_and_analyze(args, &c, input, fixture)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    let manifest = emit_report(&analysis.report_input(), &out, &ReportOptions { svg: c.svg })?;
    if format_of(args) == Format::Json {
        say(&serde_json::to_string_pretty(&manifest)?)?;
    } else {
        for f in &manifest.files {
            say(&format!("{}  {}", f.sha256, out.join(&f.path).display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn reproduce(args: &GlobalArgs, cerebras: Option<&Path>, pythia: Option<&Path>) -> Result<ExitCode> {
    let read = |p: Option<&Path>, bundled: &'static str| -> Result<String> {
        match p {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
            None => Ok(bundled.to_string()),
        }
    };
    let summary = reproduce_with(
        &read(cerebras, fixtures::CEREBRAS_CSV)?,
        &read(pythia, fixtures::PYTHIA_CSV)?,
    );
    if format_of(args) == Format::Json {
        say(&serde_json::to_string_pretty(&summary)?)?;
    } else {
        for check in &summary.checks {
            let verdict = if check.passed { "PASS" } else { "FAIL" };
            say(&format!(
                "check {}: {verdict}  {}  ({})",
                check.id, check.name, check.detail
            ))?;
        }
        let passed = summary.checks.iter().filter(|c| c.passed).count();
        say(&format!("{passed}/{} checks passed", summary.checks.len()))?;
    }
    Ok(if summary.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
