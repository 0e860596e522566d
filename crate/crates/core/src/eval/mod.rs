//! Scoring of predicted queries against gold entries.

mod bleu;
mod errors;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetEntry;
use crate::par::parallel_map;
use crate::sparql::{normalized, parse_query, Dialect, EntityId, Query, SparqlError};

pub use bleu::{corpus_bleu, corpus_bleu_tokens, BleuScore, Smoothing, Tokenizer, MAX_ORDER};
pub use errors::{categorize_errors, categorize_errors_with, error_report, ErrorCategory, ErrorProfile, ErrorReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{golds} gold items but {preds} predictions")]
    LengthMismatch { golds: usize, preds: usize },
    #[error("prediction for unknown id {0}")]
    UnknownId(u64),
    #[error("more than one prediction for id {0}")]
    DuplicatePrediction(u64),
    #[error("gold entry {id}: {source}")]
    Gold { id: u64, source: SparqlError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: u64,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Canonical strings equal, triple order included.
    #[default]
    Strict,
    /// Triples and filters sorted before comparing.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MatchOutcome {
    Correct,
    Incorrect,
    Unparseable,
}

impl MatchOutcome {
    pub fn is_correct(self) -> bool {
        self == MatchOutcome::Correct
    }
}

/// Which gold field predictions are compared with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GoldField {
    #[default]
    SparqlPatternModEntities,
    Sparql,
}

impl GoldField {
    pub fn text(self, entry: &DatasetEntry) -> &str {
        match self {
            GoldField::SparqlPatternModEntities => &entry.sparql_pattern_mod_entities,
            GoldField::Sparql => &entry.sparql,
        }
    }
}

fn canonical(q: &Query, mode: MatchMode) -> String {
    match mode {
        MatchMode::Strict => q.to_string(),
        MatchMode::Normalized => normalized(q).to_string(),
    }
}

/// Compares a parsed prediction with the gold query.
pub fn match_parsed(gold: &Query, pred: Option<&Query>, mode: MatchMode) -> MatchOutcome {
    match pred {
        None => MatchOutcome::Unparseable,
        Some(p) if canonical(p, mode) == canonical(gold, mode) => MatchOutcome::Correct,
        Some(_) => MatchOutcome::Incorrect,
    }
}

/// Parses `pred` in the Wikidata dialect and compares canonical forms.
pub fn exact_match(gold: &Query, pred: &str, mode: MatchMode) -> MatchOutcome {
    match_parsed(gold, parse_query(pred, Dialect::Wikidata).ok().as_ref(), mode)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthTally {
    pub correct: usize,
    pub total: usize,
}

impl DepthTally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub mode: MatchMode,
    pub gold_field: GoldField,
    /// Gold entries without a prediction count as incorrect.
    pub strict_coverage: bool,
    pub smoothing: Smoothing,
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: MatchMode::Strict,
            gold_field: GoldField::default(),
            strict_coverage: false,
            smoothing: Smoothing::None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredPair {
    pub id: u64,
    pub recursion_depth: u32,
    pub outcome: MatchOutcome,
    pub profile: ErrorProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evaluation {
    pub pairs: Vec<ScoredPair>,
    pub uncovered: Vec<u64>,
    pub by_depth: BTreeMap<u32, DepthTally>,
    pub exact_match: f64,
    pub bleu: Option<BleuScore>,
}

/// Per-depth (correct, total). Gold ids without a prediction are skipped,
/// or counted as wrong under `strict_coverage`.
pub fn accuracy_by_complexity(
    gold: &[DatasetEntry],
    predictions: &[PredictionRecord],
    opts: &EvalOptions,
) -> Result<BTreeMap<u32, DepthTally>, EvalError> {
    Ok(evaluate(gold, predictions, opts, |_| false)?.by_depth)
}

fn index_predictions<'a>(
    gold: &[DatasetEntry],
    predictions: &'a [PredictionRecord],
) -> Result<BTreeMap<u64, &'a PredictionRecord>, EvalError> {
    let ids: BTreeSet<u64> = gold.iter().map(|e| e.id).collect();
    let mut by_id = BTreeMap::new();
    for p in predictions {
        if !ids.contains(&p.id) {
            return Err(EvalError::UnknownId(p.id));
        }
        if by_id.insert(p.id, p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id));
        }
    }
    Ok(by_id)
}

/// Scores every prediction: exact match, error profile, per-depth tallies and
/// corpus BLEU over whitespace tokens of the canonical gold text and the raw
/// prediction.
pub fn evaluate(
    gold: &[DatasetEntry],
    predictions: &[PredictionRecord],
    opts: &EvalOptions,
    exclude_entity: impl Fn(EntityId) -> bool + Sync,
) -> Result<Evaluation, EvalError> {
    let by_id = index_predictions(gold, predictions)?;
    let golds: Vec<(&DatasetEntry, Query)> = gold
        .iter()
        .map(|e| {
            parse_query(opts.gold_field.text(e), Dialect::Wikidata)
                .map(|q| (e, q))
                .map_err(|source| EvalError::Gold { id: e.id, source })
        })
        .collect::<Result<_, _>>()?;

    let scored: Vec<Option<ScoredPair>> = parallel_map(&golds, opts.workers, |(entry, gq)| {
        let pred = by_id.get(&entry.id)?;
        let pq = parse_query(&pred.prediction, Dialect::Wikidata).ok();
        Some(ScoredPair {
            id: entry.id,
            recursion_depth: entry.recursion_depth,
            outcome: match_parsed(gq, pq.as_ref(), opts.mode),
            profile: categorize_errors_with(gq, pq.as_ref(), &exclude_entity),
        })
    });

    let mut by_depth: BTreeMap<u32, DepthTally> = BTreeMap::new();
    let mut pairs = Vec::new();
    let mut uncovered = Vec::new();
    let (mut refs, mut hyps) = (Vec::new(), Vec::new());
    for ((entry, gq), s) in golds.iter().zip(scored) {
        match s {
            Some(pair) => {
                let t = by_depth.entry(entry.recursion_depth).or_default();
                t.total += 1;
                t.correct += pair.outcome.is_correct() as usize;
                refs.push(gq.to_string());
                hyps.push(by_id[&entry.id].prediction.clone());
                pairs.push(pair);
            }
            None => {
                uncovered.push(entry.id);
                if opts.strict_coverage {
                    by_depth.entry(entry.recursion_depth).or_default().total += 1;
                }
            }
        }
    }
    let total: usize = by_depth.values().map(|t| t.total).sum();
    let correct: usize = by_depth.values().map(|t| t.correct).sum();
    let bleu = corpus_bleu(&refs, &hyps, Tokenizer::Whitespace, opts.smoothing).ok();
    Ok(Evaluation {
        pairs,
        uncovered,
        by_depth,
        exact_match: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        bleu,
    })
}
