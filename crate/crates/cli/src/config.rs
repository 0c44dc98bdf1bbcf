//! TOML run configuration. Command-line flags override any field set here.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use entrain::backend::ModelSpec;
use entrain::ContextCondition;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub r2_strong: f64,
    pub p_strong: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            r2_strong: 0.8,
            p_strong: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub relations_path: Option<PathBuf>,
    pub vocab_path: Option<PathBuf>,
    /// Empty means all four.
    pub conditions: Vec<ContextCondition>,
    pub cap: usize,
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    pub concurrency: usize,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub family: Option<String>,
    pub thresholds: Thresholds,
    /// Use normal instead of Student-t critical values.
    pub normal_ci: bool,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            relations_path: None,
            vocab_path: None,
            conditions: Vec::new(),
            cap: DEFAULT_CAP,
            seed: 0,
            models: Vec::new(),
            concurrency: 4,
            out: None,
            cache_dir: None,
            family: None,
            thresholds: Thresholds::default(),
            normal_ci: false,
            svg: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.relations_path,
            &mut config.vocab_path,
            &mut config.out,
            &mut config.cache_dir,
        ] {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        }
        Ok(config)
    }

    pub fn conditions(&self) -> Vec<ContextCondition> {
        if self.conditions.is_empty() {
            ContextCondition::ALL.to_vec()
        } else {
            self.conditions.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap == 0 {
            bail!(entrain::ValidationError::new("cap must be at least 1"));
        }
        if self.concurrency == 0 {
            bail!(entrain::ValidationError::new("concurrency must be at least 1"));
        }
        let t = &self.thresholds;
        if !(0.0..=1.0).contains(&t.r2_strong) || !(t.p_strong > 0.0 && t.p_strong < 1.0) {
            bail!(entrain::ValidationError::new(
                "r2_strong must be in [0, 1] and p_strong in (0, 1)"
            ));
        }
        for m in &self.models {
            m.validate()?;
        }
        Ok(())
    }
}
