//! Relation files: templated factual queries with their (subject, object) samples.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, ValidationError};

/// Placeholder substituted with a sample's subject.
pub const SUBJECT_PLACEHOLDER: &str = "{subject}";

/// One known fact of a relation. `object` is the gold answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSample {
    pub subject: String,
    pub object: String,
    /// Overrides the relation's prompt template for this subject (e.g. plural agreement).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_template: Option<String>,
}

impl FactSample {
    pub fn new(subject: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            object: object.into(),
            prompt_template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub name: String,
    /// Query template; the object is the next-token continuation.
    pub prompt_template: String,
    /// Declarative form used when the relation appears as context. Defaults to the prompt template.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_template: Option<String>,
    pub samples: Vec<FactSample>,
}

fn fill(template: &str, subject: &str) -> String {
    template
        .replacen(SUBJECT_PLACEHOLDER, subject, 1)
        .trim_end()
        .to_string()
}

fn check_template(relation: &str, template: &str) -> Result<(), ValidationError> {
    let count = template.matches(SUBJECT_PLACEHOLDER).count();
    if count != 1 {
        return Err(ValidationError::new(format!(
            "relation `{relation}`: template {template:?} must contain exactly one {SUBJECT_PLACEHOLDER} placeholder (found {count})"
        )));
    }
    Ok(())
}

impl Relation {
    /// The query text for `sample`, trailing blanks removed.
    pub fn query_for(&self, sample: &FactSample) -> String {
        let template = sample.prompt_template.as_deref().unwrap_or(&self.prompt_template);
        fill(template, &sample.subject)
    }

    /// A complete sentence asserting `object` of `sample.subject`.
    pub fn statement(&self, sample: &FactSample, object: &str) -> String {
        let head = match &self.context_template {
            Some(t) => fill(t, &sample.subject),
            None => self.query_for(sample),
        };
        format!("{head} {object}.")
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("relation with empty id"));
        }
        check_template(&self.id, &self.prompt_template)?;
        if let Some(t) = &self.context_template {
            check_template(&self.id, t)?;
        }
        let mut seen = HashSet::new();
        for s in &self.samples {
            if s.subject.trim().is_empty() || s.object.trim().is_empty() {
                return Err(ValidationError::new(format!(
                    "relation `{}`: sample with empty subject or object",
                    self.id
                )));
            }
            if s.subject == s.object {
                return Err(ValidationError::new(format!(
                    "relation `{}`: subject equals object ({:?})",
                    self.id, s.subject
                )));
            }
            if let Some(t) = &s.prompt_template {
                check_template(&self.id, t)?;
            }
            if !seen.insert((s.subject.as_str(), s.object.as_str())) {
                return Err(ValidationError::new(format!(
                    "relation `{}`: duplicate sample ({:?}, {:?})",
                    self.id, s.subject, s.object
                )));
            }
        }
        Ok(())
    }
}

/// Parse and validate a relations document. `origin` is only used in error messages.
pub fn parse_relations(text: &str, origin: &Path) -> Result<Vec<Relation>, DataError> {
    let relations: Vec<Relation> =
        serde_json::from_str(text).map_err(|e| DataError::format(origin, e.line(), e.column(), e.to_string()))?;
    let mut ids = HashSet::new();
    for r in &relations {
        r.validate()?;
        if !ids.insert(r.id.as_str()) {
            return Err(ValidationError::new(format!("duplicate relation id `{}`", r.id)).into());
        }
    }
    Ok(relations)
}

/// Load a JSON relations file, preserving file order.
pub fn load_relations(path: impl AsRef<Path>) -> Result<Vec<Relation>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_relations(&text, path)
}

/// One word per line; blank lines and surrounding whitespace ignored.
pub fn parse_vocabulary(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vec<String>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    Ok(parse_vocabulary(&text))
}
