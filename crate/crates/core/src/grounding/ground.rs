use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dataset::{DatasetEntry, MigratedEntry, QuestionKind};
use crate::sparql::{
    bind_placeholders, parse_query, Bindings, Dialect, EntityId, FilterClause, Placeholder, Query, QueryForm,
    SparqlError, Term,
};
use crate::text::replace_placeholders;

use super::{build_grounding_query, EndpointError, QueryResult, QueryService, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundOptions {
    /// Order probe rows so the chosen assignment is reproducible.
    pub deterministic: bool,
    /// Language of the source questions and of the labels used to realize them.
    pub language: String,
    /// Assignments to take per pattern. Anything above 1 multiplies entries.
    pub bindings_per_entry: usize,
    /// Entities that may not fill a placeholder, typically the special
    /// entities kept verbatim in patterns.
    pub excluded: BTreeSet<EntityId>,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions { deterministic: false, language: "en".into(), bindings_per_entry: 1, excluded: BTreeSet::new() }
    }
}

/// Placeholder assignments plus the labels fetched for the bound entities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding {
    pub assignments: Bindings,
    pub labels: BTreeMap<(EntityId, String), String>,
}

impl Binding {
    pub fn label(&self, entity: EntityId, language: &str) -> Option<&str> {
        self.labels.get(&(entity, language.to_string())).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedEntry {
    pub entry: DatasetEntry,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundOutcome {
    Grounded(Vec<GroundedEntry>),
    /// The probe found no satisfying assignment.
    NoAssignment {
        probe: String,
    },
    /// An assignment exists but the question could not be written out.
    Unrealizable {
        probe: String,
        reason: String,
    },
}

#[derive(Debug, Error)]
pub enum GroundError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("entry {id}: {source}")]
    Query { id: u64, source: SparqlError },
    #[error("entry {id}: {message}")]
    Invalid { id: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RealizeError {
    #[error("no `{language}` label for {entity}")]
    MissingLabel { entity: EntityId, language: String },
    #[error("placeholder {0} has no assignment")]
    Unbound(Placeholder),
}

/// Probes for up to `limit` satisfying assignments of `pattern`'s
/// placeholders. An empty result means none exists. A pattern without
/// placeholders yields one empty assignment when it holds.
///
/// Entities in `excluded`, and entities written verbatim in the pattern, are
/// never bound. Rows that bind one are discarded and the probe is re-run
/// with `?v != wd:Q..` filters for the offending entities.
pub fn ground_pattern(
    pattern: &Query,
    service: &impl QueryService,
    deterministic: bool,
    limit: usize,
    excluded: &BTreeSet<EntityId>,
) -> Result<Vec<Bindings>, EndpointError> {
    let limit = limit.max(1);
    let g = build_grounding_query(pattern, deterministic);
    if g.placeholder_order.is_empty() {
        let holds = service.execute(&g.probe)?.is_satisfied();
        return Ok(if holds { vec![Bindings::new()] } else { Vec::new() });
    }
    let constants: BTreeSet<EntityId> = pattern.terms().filter_map(Term::as_entity).collect();
    let forbidden = |e: &EntityId| excluded.contains(e) || constants.contains(e);

    let mut probe = g.probe.clone();
    probe.limit = Some(limit as u64);
    let mut filtered_out = BTreeSet::new();
    loop {
        let rows = match service.execute(&probe)? {
            QueryResult::Rows(rows) => rows,
            QueryResult::Boolean(_) => return Err(EndpointError::Malformed("probe answered with a boolean".into())),
        };
        let mut out = Vec::new();
        let mut offending = BTreeSet::new();
        'rows: for row in &rows {
            let mut bindings = Bindings::new();
            for (var, placeholder) in &g.placeholder_order {
                match row.get(var.name()) {
                    Some(Value::Entity(e)) if forbidden(e) => {
                        offending.insert(*e);
                        continue 'rows;
                    }
                    Some(Value::Entity(e)) => {
                        bindings.insert(*placeholder, *e);
                    }
                    // Literal or missing cells cannot stand in for an entity.
                    _ => continue 'rows,
                }
            }
            let distinct: BTreeSet<_> = bindings.values().collect();
            if distinct.len() != bindings.len() {
                return Err(EndpointError::Malformed(format!("probe row violates distinctness: {row:?}")));
            }
            out.push(bindings);
        }
        offending.retain(|e| !filtered_out.contains(e));
        if out.len() >= limit || offending.is_empty() {
            out.truncate(limit);
            return Ok(out);
        }
        for e in offending {
            for (var, _) in &g.placeholder_order {
                probe.filters.push(FilterClause::not_equal(Term::Variable(var.clone()), Term::Entity(e)));
            }
            filtered_out.insert(e);
        }
        log::debug!("re-probing without {} reserved entities", filtered_out.len());
    }
}

/// Replaces every placeholder `Mi` in `pattern_text` with `[label]`.
pub fn realize_question(pattern_text: &str, binding: &Binding, language: &str) -> Result<String, RealizeError> {
    replace_placeholders(pattern_text, |p| {
        let entity = *binding.assignments.get(&p).ok_or(RealizeError::Unbound(p))?;
        let label = binding
            .label(entity, language)
            .ok_or_else(|| RealizeError::MissingLabel { entity, language: language.to_string() })?;
        Ok(format!("[{label}]"))
    })
}

/// Fetches labels in `language` for every assigned entity.
pub fn fetch_labels(
    service: &impl QueryService,
    bindings: &Bindings,
    language: &str,
) -> Result<Binding, EndpointError> {
    let entities: Vec<EntityId> = bindings.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let labels =
        service.labels(&entities, language)?.into_iter().map(|(e, l)| ((e, language.to_string()), l)).collect();
    Ok(Binding { assignments: bindings.clone(), labels })
}

/// Grounds one migrated entry: probes, binds the pattern, realizes the
/// question and records the expected response. Yes/no entries expect
/// `true`; wh entries expect the rows returned by the grounded query.
pub fn ground_entry(
    entry: &MigratedEntry,
    service: &impl QueryService,
    opts: &GroundOptions,
) -> Result<GroundOutcome, GroundError> {
    let pattern = parse_query(&entry.sparql_pattern_mod_entities, Dialect::Wikidata)
        .map_err(|source| GroundError::Query { id: entry.id, source })?;
    if QuestionKind::of_form(&pattern.form) != entry.question_kind {
        return Err(GroundError::Invalid {
            id: entry.id,
            message: "questionKind disagrees with the query form".into(),
        });
    }
    let probe_text = build_grounding_query(&pattern, opts.deterministic).probe.to_string();
    let found = ground_pattern(&pattern, service, opts.deterministic, opts.bindings_per_entry, &opts.excluded)?;
    if found.is_empty() {
        log::info!("entry {}: no assignment for probe {probe_text}", entry.id);
        return Ok(GroundOutcome::NoAssignment { probe: probe_text });
    }

    let mut grounded = Vec::with_capacity(found.len());
    for bindings in found {
        let binding = fetch_labels(service, &bindings, &opts.language)?;
        let question = match realize_question(&entry.question_pattern_mod_entities, &binding, &opts.language) {
            Ok(q) => q,
            Err(e) => return Ok(GroundOutcome::Unrealizable { probe: probe_text, reason: e.to_string() }),
        };
        let query = bind_placeholders(&pattern, &bindings);
        let expected_response = match &query.form {
            QueryForm::Ask | QueryForm::SelectCount => QueryResult::Boolean(true),
            QueryForm::Select { .. } => service.execute(&query)?,
        };
        let entry = DatasetEntry {
            id: entry.id,
            question_with_brackets: [(opts.language.clone(), question)].into(),
            question_pattern_mod_entities: [(opts.language.clone(), entry.question_pattern_mod_entities.clone())]
                .into(),
            sparql: query.to_string(),
            sparql_pattern_mod_entities: entry.sparql_pattern_mod_entities.clone(),
            recursion_depth: entry.recursion_depth,
            expected_response,
            question_kind: entry.question_kind,
            negative_of: None,
        };
        grounded.push(GroundedEntry { entry, binding });
    }
    Ok(GroundOutcome::Grounded(grounded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::TripleStoreSnapshot;
    use crate::sparql::PropertyId;

    fn q(n: u64) -> EntityId {
        EntityId(n)
    }

    fn worked_snapshot() -> TripleStoreSnapshot {
        let mut s = TripleStoreSnapshot::new();
        // ?x0 is an actor entity; Q1 stands in for it.
        s.insert(q(1), PropertyId(453), q(50807639));
        s.insert(q(1), PropertyId(21), q(6581097));
        s.insert(q(1), PropertyId(26), q(1560129));
        s.set_label(q(50807639), "en", "Lohengrin");
        s.set_label(q(1560129), "en", "Margarete Joswig");
        s
    }

    fn worked_entry() -> MigratedEntry {
        MigratedEntry {
            id: 0,
            question_pattern_mod_entities: "Did M0 's male actor marry M2".into(),
            sparql_pattern_mod_entities:
                "ASK WHERE { ?x0 wdt:P453 M0 . ?x0 wdt:P21 wd:Q6581097 . ?x0 wdt:P26 M2 . FILTER ( ?x0 != M2 ) }".into(),
            recursion_depth: 20,
            question_kind: QuestionKind::YesNo,
        }
    }

    #[test]
    fn worked_example_grounds() {
        let out = ground_entry(&worked_entry(), &worked_snapshot(), &GroundOptions::default()).unwrap();
        let GroundOutcome::Grounded(entries) = out else { panic!("{out:?}") };
        let e = &entries[0].entry;
        assert_eq!(
            e.sparql,
            "ASK WHERE { ?x0 wdt:P453 wd:Q50807639 . ?x0 wdt:P21 wd:Q6581097 . ?x0 wdt:P26 wd:Q1560129 . FILTER ( ?x0 != wd:Q1560129 ) }"
        );
        assert_eq!(e.question_with_brackets["en"], "Did [Lohengrin] 's male actor marry [Margarete Joswig]");
        assert_eq!(e.expected_response, QueryResult::Boolean(true));
    }

    #[test]
    fn unsatisfiable_pattern_has_no_assignment() {
        let mut entry = worked_entry();
        entry.sparql_pattern_mod_entities = "ASK WHERE { ?x0 wdt:P57 M0 }".into();
        entry.question_pattern_mod_entities = "Did a director direct M0".into();
        let out = ground_entry(&entry, &worked_snapshot(), &GroundOptions::default()).unwrap();
        assert_eq!(out, GroundOutcome::NoAssignment { probe: "SELECT ?v0 WHERE { ?x0 wdt:P57 ?v0 } LIMIT 1".into() });
    }

    #[test]
    fn missing_label_is_reported() {
        let mut snap = worked_snapshot();
        snap.set_label(q(1560129), "he", "x");
        let opts = GroundOptions { language: "he".into(), ..GroundOptions::default() };
        let out = ground_entry(&worked_entry(), &snap, &opts).unwrap();
        let GroundOutcome::Unrealizable { reason, .. } = out else { panic!("{out:?}") };
        assert!(reason.contains("Q50807639") && reason.contains("he"), "{reason}");
    }

    #[test]
    fn reserved_entities_are_not_bound() {
        let mut s = TripleStoreSnapshot::new();
        s.insert(q(1), PropertyId(21), q(6581097));
        s.insert(q(1), PropertyId(26), q(6581097));
        s.insert(q(1), PropertyId(26), q(9));
        s.insert(q(1), PropertyId(26), q(6581072));
        let pattern = parse_query("ASK WHERE { ?x0 wdt:P21 wd:Q6581097 . ?x0 wdt:P26 M0 }", Dialect::Wikidata).unwrap();
        let excluded = [q(6581072)].into();
        let found = ground_pattern(&pattern, &s, true, 1, &excluded).unwrap();
        assert_eq!(found, vec![[(Placeholder(0), q(9))].into()]);
        s.insert(q(1), PropertyId(26), q(9)); // duplicate, ignored
        let only_reserved =
            TripleStoreSnapshot::from_triples([(q(1), PropertyId(21), q(6581097)), (q(1), PropertyId(26), q(6581097))]);
        assert!(ground_pattern(&pattern, &only_reserved, false, 1, &excluded).unwrap().is_empty());
    }

    #[test]
    fn realize_without_placeholders_is_identity() {
        let b = Binding::default();
        assert_eq!(realize_question("Was a film directed", &b, "en").unwrap(), "Was a film directed");
    }

    #[test]
    fn wh_entries_store_answer_rows() {
        let entry = MigratedEntry {
            id: 3,
            question_pattern_mod_entities: "Who married M0".into(),
            sparql_pattern_mod_entities: "SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P26 M0 }".into(),
            recursion_depth: 4,
            question_kind: QuestionKind::Wh,
        };
        let out = ground_entry(&entry, &worked_snapshot(), &GroundOptions::default()).unwrap();
        let GroundOutcome::Grounded(entries) = out else { panic!("{out:?}") };
        let QueryResult::Rows(rows) = &entries[0].entry.expected_response else { panic!() };
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["x0"], Value::Entity(q(1)));
    }

    #[test]
    fn several_bindings_when_requested() {
        let mut s = TripleStoreSnapshot::new();
        for i in 0..4 {
            s.insert(q(10 + i), PropertyId(57), q(20 + i));
            s.set_label(q(20 + i), "en", format!("film {i}"));
        }
        let entry = MigratedEntry {
            id: 1,
            question_pattern_mod_entities: "Who directed M0".into(),
            sparql_pattern_mod_entities: "SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P57 M0 }".into(),
            recursion_depth: 2,
            question_kind: QuestionKind::Wh,
        };
        let opts = GroundOptions { deterministic: true, bindings_per_entry: 3, ..GroundOptions::default() };
        let GroundOutcome::Grounded(entries) = ground_entry(&entry, &s, &opts).unwrap() else { panic!() };
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].entry.question_with_brackets["en"], "Who directed [film 0]");
    }
}
