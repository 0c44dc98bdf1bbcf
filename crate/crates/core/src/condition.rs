//! The four context conditions a probe can be run under.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// How the context prepended to a query relates to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextCondition {
    /// A true statement of the same relation about a different subject.
    Related,
    /// A true statement taken from a different relation.
    Irrelevant,
    /// A single arbitrary capitalized word.
    Random,
    /// The query's own relation asserting a false object.
    Counterfactual,
}

impl ContextCondition {
    /// Fixed display order used by tables and heatmaps.
    pub const ALL: [ContextCondition; 4] = [
        ContextCondition::Related,
        ContextCondition::Irrelevant,
        ContextCondition::Random,
        ContextCondition::Counterfactual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextCondition::Related => "related",
            ContextCondition::Irrelevant => "irrelevant",
            ContextCondition::Random => "random",
            ContextCondition::Counterfactual => "counterfactual",
        }
    }

    /// Title-case label for human-readable tables.
    pub fn label(self) -> &'static str {
        match self {
            ContextCondition::Related => "Related",
            ContextCondition::Irrelevant => "Irrelevant",
            ContextCondition::Random => "Random",
            ContextCondition::Counterfactual => "Counterfactual",
        }
    }

    /// Related and Counterfactual contexts carry propositional content about the query domain.
    pub fn is_semantic(self) -> bool {
        matches!(self, ContextCondition::Related | ContextCondition::Counterfactual)
    }
}

impl fmt::Display for ContextCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextCondition {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "related" => Ok(ContextCondition::Related),
            "irrelevant" => Ok(ContextCondition::Irrelevant),
            "random" => Ok(ContextCondition::Random),
            "counterfactual" | "counterfact." => Ok(ContextCondition::Counterfactual),
            other => Err(ValidationError::new(format!("unknown context condition `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialized_names_are_lowercase() {
        for c in ContextCondition::ALL {
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
            assert_eq!(c.as_str().parse::<ContextCondition>().unwrap(), c);
        }
    }

    #[test]
    fn unknown_name_rejected() {
        assert!("neutral".parse::<ContextCondition>().is_err());
    }
}
