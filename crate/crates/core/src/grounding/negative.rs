//! "No"-answer questions made by swapping one entity of a true yes/no entry
//! for another entity seen under the same predicate.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetEntry, QuestionKind};
use crate::sparql::{
    align_bindings, bind_placeholders, parse_query, Bindings, Dialect, EntityId, Placeholder, PropertyId, Query, Term,
    TriplePattern,
};

use super::ground::{fetch_labels, realize_question, GroundError};
use super::{QueryResult, QueryService};

/// Predicate → entities observed as its object in grounded entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicatePools {
    pools: BTreeMap<PropertyId, BTreeSet<EntityId>>,
}

/// The property of each single-step edge whose object is the placeholder, in
/// triple order.
fn preceding_predicates(pattern: &Query, placeholder: Placeholder) -> Vec<PropertyId> {
    pattern
        .triples
        .iter()
        .filter_map(|t| match t {
            TriplePattern::Edge { path, object: Term::Placeholder(p), .. }
                if *p == placeholder && path.steps.len() == 1 =>
            {
                match path.steps[0].property {
                    Term::Property(pid) if !path.steps[0].reversed => Some(pid),
                    _ => None,
                }
            }
            _ => None,
        })
        .collect()
}

impl PredicatePools {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the objects bound to placeholders in one grounded pattern.
    pub fn observe(&mut self, pattern: &Query, bindings: &Bindings) {
        for (placeholder, entity) in bindings {
            for p in preceding_predicates(pattern, *placeholder) {
                self.pools.entry(p).or_default().insert(*entity);
            }
        }
    }

    /// Builds pools from grounded entries, skipping any whose query and
    /// pattern do not align.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a DatasetEntry>) -> Self {
        let mut pools = Self::new();
        for e in entries {
            let (Ok(q), Ok(p)) = (
                parse_query(&e.sparql, Dialect::Wikidata),
                parse_query(&e.sparql_pattern_mod_entities, Dialect::Wikidata),
            ) else {
                continue;
            };
            if let Some(b) = align_bindings(&p, &q) {
                pools.observe(&p, &b);
            }
        }
        pools
    }

    pub fn insert(&mut self, property: PropertyId, entity: EntityId) {
        self.pools.entry(property).or_default().insert(entity);
    }

    pub fn get(&self, property: PropertyId) -> Option<&BTreeSet<EntityId>> {
        self.pools.get(&property)
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NegativeOutcome {
    /// The derived entry; `id` is still the source id and `negativeOf` is set.
    Negative(DatasetEntry),
    Exhausted {
        attempts: usize,
    },
}

/// Per-entry RNG so results do not depend on processing order.
pub fn entry_rng(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Candidate replacements per placeholder: pool-mates of the predicate that
/// precedes its first object occurrence, minus any entity already in the
/// query.
fn candidate_positions(
    pattern: &Query,
    bindings: &Bindings,
    pools: &PredicatePools,
) -> Vec<(Placeholder, Vec<EntityId>)> {
    let mut in_use: BTreeSet<EntityId> = bindings.values().copied().collect();
    in_use.extend(pattern.terms().filter_map(Term::as_entity));
    bindings
        .keys()
        .filter_map(|&placeholder| {
            let p = *preceding_predicates(pattern, placeholder).first()?;
            let candidates: Vec<EntityId> = pools.get(p)?.iter().copied().filter(|e| !in_use.contains(e)).collect();
            (!candidates.is_empty()).then_some((placeholder, candidates))
        })
        .collect()
}

/// Tries replacements until one makes the entry's ASK query false, with at
/// most `max_attempts` verification queries.
pub fn negative_sample(
    entry: &DatasetEntry,
    pools: &PredicatePools,
    service: &impl QueryService,
    max_attempts: usize,
    rng: &mut impl Rng,
) -> Result<NegativeOutcome, GroundError> {
    let invalid = |message: &str| GroundError::Invalid { id: entry.id, message: message.to_string() };
    if entry.question_kind != QuestionKind::YesNo || entry.expected_response != QueryResult::Boolean(true) {
        return Err(invalid("negative sampling needs a yes/no entry whose answer is true"));
    }
    let query =
        parse_query(&entry.sparql, Dialect::Wikidata).map_err(|source| GroundError::Query { id: entry.id, source })?;
    let pattern = parse_query(&entry.sparql_pattern_mod_entities, Dialect::Wikidata)
        .map_err(|source| GroundError::Query { id: entry.id, source })?;
    if !query.is_ask() {
        return Err(invalid("negative sampling needs an ASK query"));
    }
    let bindings =
        align_bindings(&pattern, &query).ok_or_else(|| invalid("sparql does not instantiate its pattern"))?;

    let mut positions = candidate_positions(&pattern, &bindings, pools);
    for (_, candidates) in positions.iter_mut() {
        candidates.shuffle(rng);
    }
    let mut attempts = 0;
    while attempts < max_attempts {
        let open: Vec<usize> = (0..positions.len()).filter(|&i| !positions[i].1.is_empty()).collect();
        if open.is_empty() {
            break;
        }
        let pick = open[rng.random_range(0..open.len())];
        let placeholder = positions[pick].0;
        let replacement = positions[pick].1.pop().expect("non-empty");
        let mut swapped = bindings.clone();
        swapped.insert(placeholder, replacement);
        let candidate = bind_placeholders(&pattern, &swapped);
        attempts += 1;
        if service.execute(&candidate)?.is_satisfied() {
            continue;
        }

        let mut questions = BTreeMap::new();
        let mut realizable = true;
        for (language, text) in &entry.question_pattern_mod_entities {
            let binding = fetch_labels(service, &swapped, language)?;
            match realize_question(text, &binding, language) {
                Ok(q) => {
                    questions.insert(language.clone(), q);
                }
                Err(e) => {
                    log::debug!("entry {}: skipping {replacement}: {e}", entry.id);
                    realizable = false;
                    break;
                }
            }
        }
        if !realizable {
            continue;
        }
        return Ok(NegativeOutcome::Negative(DatasetEntry {
            id: entry.id,
            question_with_brackets: questions,
            question_pattern_mod_entities: entry.question_pattern_mod_entities.clone(),
            sparql: candidate.to_string(),
            sparql_pattern_mod_entities: entry.sparql_pattern_mod_entities.clone(),
            recursion_depth: entry.recursion_depth,
            expected_response: QueryResult::Boolean(false),
            question_kind: QuestionKind::YesNo,
            negative_of: Some(entry.id),
        }));
    }
    Ok(NegativeOutcome::Exhausted { attempts })
}
