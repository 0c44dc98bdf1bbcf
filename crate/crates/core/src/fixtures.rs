//! Bundled data so reproduction runs offline.

use std::path::Path;

use crate::backend::{ModelSpec, ReplaySource};
use crate::error::DataError;
use crate::relation::{parse_relations, parse_vocabulary, Relation};

/// Raw per-condition mean logits for seven Cerebras-GPT sizes (111M to 13B).
pub const CEREBRAS_CSV: &str = include_str!("../fixtures/cerebras_aggregates.csv");
/// Raw per-condition mean logits for six Pythia sizes (410M to 12B).
pub const PYTHIA_CSV: &str = include_str!("../fixtures/pythia_aggregates.csv");
/// Five small relations with three facts each.
pub const EXAMPLE_RELATIONS_JSON: &str = include_str!("../fixtures/example_relations.json");
pub const RANDOM_WORDS_TXT: &str = include_str!("../fixtures/random_words.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Cerebras,
    Pythia,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::Cerebras, Family::Pythia];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cerebras => "cerebras",
            Family::Pythia => "pythia",
        }
    }

    pub fn csv(self) -> &'static str {
        match self {
            Family::Cerebras => CEREBRAS_CSV,
            Family::Pythia => PYTHIA_CSV,
        }
    }

    fn origin(self) -> &'static str {
        match self {
            Family::Cerebras => "fixtures/cerebras_aggregates.csv",
            Family::Pythia => "fixtures/pythia_aggregates.csv",
        }
    }

    pub fn replay(self) -> ReplaySource {
        replay_from_csv(self.csv(), self.origin()).expect("bundled fixture parses")
    }

    pub fn models(self) -> Vec<ModelSpec> {
        self.replay().models(Some(self.name()))
    }
}

pub fn replay_from_csv(text: &str, origin: &str) -> Result<ReplaySource, DataError> {
    ReplaySource::from_aggregate_csv(text, Path::new(origin))
}

pub fn example_relations() -> Vec<Relation> {
    parse_relations(EXAMPLE_RELATIONS_JSON, Path::new("fixtures/example_relations.json"))
        .expect("bundled fixture parses")
}

pub fn random_words() -> Vec<String> {
    parse_vocabulary(RANDOM_WORDS_TXT)
}
