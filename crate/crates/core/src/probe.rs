//! Probe generation for the four context conditions.
//!
//! Related and Counterfactual probes are enumerated exhaustively within a
//! relation (every valid partner sample, every false object), then reduced to
//! a seeded uniform subset of `cap` when the enumeration is larger. Irrelevant
//! and Random probes draw one foreign statement or one vocabulary word per
//! sample, again capped per relation.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condition::ContextCondition;
use crate::error::{DataError, ValidationError};
use crate::relation::{FactSample, Relation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeInstance {
    pub id: String,
    pub relation_id: String,
    pub condition: ContextCondition,
    pub query_text: String,
    pub context_text: String,
    pub gold: String,
    pub distractor: String,
    /// Position of the distractor choice in the generator's RNG stream (Irrelevant,
    /// Random) or in the relation's candidate enumeration (Related, Counterfactual).
    pub seed_trace: u64,
}

impl ProbeInstance {
    /// Checks the condition-independent invariants.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.gold == self.distractor {
            return Err(ValidationError::new(format!(
                "probe {}: gold equals distractor",
                self.id
            )));
        }
        if self.context_text.is_empty() || !self.context_text.contains(&self.distractor) {
            return Err(ValidationError::new(format!(
                "probe {}: distractor {:?} not found in context {:?}",
                self.id, self.distractor, self.context_text
            )));
        }
        Ok(())
    }
}

/// Stable identifier over (relation, condition, subject, distractor).
pub fn probe_id(relation_id: &str, condition: ContextCondition, subject: &str, distractor: &str) -> String {
    let mut h = Sha256::new();
    for part in [relation_id, condition.as_str(), subject, distractor] {
        h.update(part.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(&h.finalize()[..16])
}

/// Returns `(with_context, without_context)` prompt strings.
pub fn render_prompts(probe: &ProbeInstance) -> (String, String) {
    let with = format!("{} {}", probe.context_text, probe.query_text);
    (with, probe.query_text.clone())
}

/// Upper-cases the first character.
pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Counts every draw so each probe can record where its distractor came from.
struct TracedRng {
    rng: ChaCha8Rng,
    draws: u64,
}

impl TracedRng {
    fn new(seed: u64, condition: ContextCondition) -> Self {
        // Each condition gets its own stream so generating one condition never
        // shifts another's draws.
        let stream = ContextCondition::ALL.iter().position(|c| *c == condition).unwrap() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, draws: 0 }
    }

    fn below(&mut self, n: usize) -> (usize, u64) {
        let trace = self.draws;
        self.draws += 1;
        (self.rng.random_range(0..n), trace)
    }

    /// Sorted subset of `amount` indices from `0..len`.
    fn subset(&mut self, len: usize, amount: usize) -> Vec<usize> {
        self.draws += 1;
        let mut picked = index::sample(&mut self.rng, len, amount).into_vec();
        picked.sort_unstable();
        picked
    }
}

struct Candidate {
    sample: usize,
    context: String,
    distractor: String,
    trace: u64,
}

fn build(relation: &Relation, condition: ContextCondition, c: Candidate) -> ProbeInstance {
    let sample = &relation.samples[c.sample];
    ProbeInstance {
        id: probe_id(&relation.id, condition, &sample.subject, &c.distractor),
        relation_id: relation.id.clone(),
        condition,
        query_text: relation.query_for(sample),
        context_text: c.context,
        gold: sample.object.clone(),
        distractor: c.distractor,
        seed_trace: c.trace,
    }
}

fn related_candidates(relation: &Relation) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut trace = 0;
    for (i, s) in relation.samples.iter().enumerate() {
        for (j, partner) in relation.samples.iter().enumerate() {
            if i != j && partner.subject != s.subject && partner.object != s.object {
                out.push(Candidate {
                    sample: i,
                    context: relation.statement(partner, &partner.object),
                    distractor: partner.object.clone(),
                    trace,
                });
            }
            trace += 1;
        }
    }
    out
}

fn counterfactual_candidates(relation: &Relation) -> Vec<Candidate> {
    let mut objects: Vec<&str> = Vec::new();
    for s in &relation.samples {
        if !objects.contains(&s.object.as_str()) {
            objects.push(&s.object);
        }
    }
    let mut out = Vec::new();
    for (i, s) in relation.samples.iter().enumerate() {
        let true_objects: HashSet<&str> = relation
            .samples
            .iter()
            .filter(|o| o.subject == s.subject)
            .map(|o| o.object.as_str())
            .collect();
        for (k, obj) in objects.iter().enumerate() {
            if !true_objects.contains(obj) {
                out.push(Candidate {
                    sample: i,
                    context: relation.statement(s, obj),
                    distractor: obj.to_string(),
                    trace: (i * objects.len() + k) as u64,
                });
            }
        }
    }
    out
}

fn irrelevant_candidate(
    relations: &[Relation],
    relation: &Relation,
    sample: &FactSample,
    index: usize,
    rng: &mut TracedRng,
) -> Option<Candidate> {
    let pools: Vec<(&Relation, Vec<&FactSample>)> = relations
        .iter()
        .filter(|r| r.id != relation.id)
        .map(|r| {
            (
                r,
                r.samples
                    .iter()
                    .filter(|s| s.object != sample.object)
                    .collect::<Vec<_>>(),
            )
        })
        .filter(|(_, pool)| !pool.is_empty())
        .collect();
    if pools.is_empty() {
        return None;
    }
    let (r, _) = rng.below(pools.len());
    let (foreign, pool) = &pools[r];
    let (k, trace) = rng.below(pool.len());
    let statement = pool[k];
    Some(Candidate {
        sample: index,
        context: foreign.statement(statement, &statement.object),
        distractor: statement.object.clone(),
        trace,
    })
}

fn random_candidate(words: &[String], sample: &FactSample, index: usize, rng: &mut TracedRng) -> Option<Candidate> {
    let eligible: Vec<&String> = words.iter().filter(|w| **w != sample.object).collect();
    if eligible.is_empty() {
        return None;
    }
    let (k, trace) = rng.below(eligible.len());
    let word = eligible[k].clone();
    Some(Candidate {
        sample: index,
        context: format!("{word}."),
        distractor: word,
        trace,
    })
}

/// Generate probes for one condition across all relations.
///
/// At most `cap` probes are produced per relation. Output is a pure function
/// of the arguments.
pub fn generate_probes(
    relations: &[Relation],
    condition: ContextCondition,
    cap: usize,
    seed: u64,
    random_vocab: &[String],
) -> Result<Vec<ProbeInstance>, ValidationError> {
    if cap == 0 {
        return Err(ValidationError::new("cap must be at least 1"));
    }
    if relations.is_empty() {
        return Ok(Vec::new());
    }
    // Capitalized single words, deduplicated, in first-seen order.
    let mut words = Vec::new();
    if condition == ContextCondition::Random {
        let mut seen = BTreeSet::new();
        for w in random_vocab {
            let w = w.trim();
            if w.is_empty() || w.contains(char::is_whitespace) {
                continue;
            }
            let cap_word = capitalize(w);
            if seen.insert(cap_word.clone()) {
                words.push(cap_word);
            }
        }
        if words.is_empty() {
            return Err(ValidationError::new("random condition needs a non-empty vocabulary"));
        }
    }
    if condition == ContextCondition::Irrelevant && relations.len() < 2 {
        return Err(ValidationError::new(
            "irrelevant condition needs at least two relations",
        ));
    }

    let mut rng = TracedRng::new(seed, condition);
    let mut out = Vec::new();
    for relation in relations {
        let candidates: Vec<Candidate> = match condition {
            ContextCondition::Related => related_candidates(relation),
            ContextCondition::Counterfactual => counterfactual_candidates(relation),
            ContextCondition::Irrelevant | ContextCondition::Random => {
                let chosen: Vec<usize> = if relation.samples.len() > cap {
                    rng.subset(relation.samples.len(), cap)
                } else {
                    (0..relation.samples.len()).collect()
                };
                chosen
                    .into_iter()
                    .filter_map(|i| {
                        let sample = &relation.samples[i];
                        if condition == ContextCondition::Irrelevant {
                            irrelevant_candidate(relations, relation, sample, i, &mut rng)
                        } else {
                            random_candidate(&words, sample, i, &mut rng)
                        }
                    })
                    .collect()
            }
        };

        let mut ids = HashSet::new();
        let mut probes: Vec<ProbeInstance> = candidates
            .into_iter()
            .map(|c| build(relation, condition, c))
            .filter(|p| ids.insert(p.id.clone()))
            .collect();
        if probes.len() > cap {
            let keep = rng.subset(probes.len(), cap);
            let mut slots: Vec<Option<ProbeInstance>> = probes.into_iter().map(Some).collect();
            probes = keep.into_iter().map(|i| slots[i].take().unwrap()).collect();
        }
        out.extend(probes);
    }
    Ok(out)
}

/// Checks `probe` against the condition-specific construction rules, given the
/// relations and vocabulary it was generated from.
pub fn check_invariants(
    probe: &ProbeInstance,
    relations: &[Relation],
    random_vocab: &[String],
) -> Result<(), ValidationError> {
    probe.validate()?;
    let fail = |what: &str| {
        Err(ValidationError::new(format!(
            "probe {} ({}): {what}",
            probe.id, probe.condition
        )))
    };
    let Some(relation) = relations.iter().find(|r| r.id == probe.relation_id) else {
        return fail("unknown relation");
    };
    let Some(sample) = relation
        .samples
        .iter()
        .find(|s| relation.query_for(s) == probe.query_text && s.object == probe.gold)
    else {
        return fail("query and gold match no sample of its relation");
    };
    match probe.condition {
        ContextCondition::Counterfactual => {
            if probe.context_text != relation.statement(sample, &probe.distractor) {
                return fail("context is not the own template with the distractor");
            }
            if relation
                .samples
                .iter()
                .any(|s| s.subject == sample.subject && s.object == probe.distractor)
            {
                return fail("distractor is a true object of the subject");
            }
        }
        ContextCondition::Related => {
            let ok = relation.samples.iter().any(|s| {
                s.subject != sample.subject
                    && s.object == probe.distractor
                    && relation.statement(s, &s.object) == probe.context_text
            });
            if !ok {
                return fail("context is not a true statement about another subject of the same relation");
            }
        }
        ContextCondition::Irrelevant => {
            let ok = relations.iter().filter(|r| r.id != relation.id).any(|r| {
                r.samples
                    .iter()
                    .any(|s| s.object == probe.distractor && r.statement(s, &s.object) == probe.context_text)
            });
            if !ok {
                return fail("context is not a true statement of another relation");
            }
        }
        ContextCondition::Random => {
            let word = &probe.distractor;
            if probe.context_text != format!("{word}.") || word.contains(char::is_whitespace) {
                return fail("context is not a single word plus a period");
            }
            if *word != capitalize(word) || !random_vocab.iter().any(|w| capitalize(w.trim()) == *word) {
                return fail("distractor is not a capitalized vocabulary word");
            }
        }
    }
    Ok(())
}

pub fn write_probes_jsonl<W: Write>(mut writer: W, probes: &[ProbeInstance]) -> std::io::Result<()> {
    for p in probes {
        serde_json::to_writer(&mut writer, p)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_probes_jsonl(path: impl AsRef<Path>) -> Result<Vec<ProbeInstance>, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut probes = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let probe: ProbeInstance =
            serde_json::from_str(&line).map_err(|e| DataError::format(path, n + 1, e.column(), e.to_string()))?;
        probe.validate()?;
        probes.push(probe);
    }
    Ok(probes)
}
