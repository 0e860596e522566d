use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::sparql::{Dialect, EntityId, PropertyId, Query, QueryForm, Term, TriplePattern};

use super::{EndpointError, QueryResult, QueryService, Row, Value};

pub const DEFAULT_ENUMERATION_BOUND: u64 = 10_000_000;

/// In-memory set of `(subject, property, object)` facts plus labels. Stands in
/// for a live endpoint in tests and offline runs.
#[derive(Debug, Clone, Default)]
pub struct TripleStoreSnapshot {
    triples: BTreeSet<(EntityId, PropertyId, EntityId)>,
    labels: BTreeMap<(EntityId, String), String>,
    by_subject: HashMap<(EntityId, PropertyId), BTreeSet<EntityId>>,
    by_object: HashMap<(PropertyId, EntityId), BTreeSet<EntityId>>,
    by_property: HashMap<PropertyId, BTreeSet<(EntityId, EntityId)>>,
    bound: u64,
}

impl TripleStoreSnapshot {
    pub fn new() -> Self {
        TripleStoreSnapshot { bound: DEFAULT_ENUMERATION_BOUND, ..Default::default() }
    }

    pub fn from_triples(triples: impl IntoIterator<Item = (EntityId, PropertyId, EntityId)>) -> Self {
        let mut s = Self::new();
        for t in triples {
            s.insert(t.0, t.1, t.2);
        }
        s
    }

    /// Maximum number of partial assignments explored per query.
    pub fn with_bound(mut self, bound: u64) -> Self {
        self.bound = bound;
        self
    }

    /// Returns false when the fact was already present.
    pub fn insert(&mut self, s: EntityId, p: PropertyId, o: EntityId) -> bool {
        if !self.triples.insert((s, p, o)) {
            return false;
        }
        self.by_subject.entry((s, p)).or_default().insert(o);
        self.by_object.entry((p, o)).or_default().insert(s);
        self.by_property.entry(p).or_default().insert((s, o));
        true
    }

    pub fn set_label(&mut self, entity: EntityId, language: &str, label: impl Into<String>) {
        self.labels.insert((entity, language.to_string()), label.into());
    }

    pub fn label(&self, entity: EntityId, language: &str) -> Option<&str> {
        self.labels.get(&(entity, language.to_string())).map(String::as_str)
    }

    pub fn contains(&self, s: EntityId, p: PropertyId, o: EntityId) -> bool {
        self.triples.contains(&(s, p, o))
    }

    pub fn triples(&self) -> impl Iterator<Item = &(EntityId, PropertyId, EntityId)> {
        self.triples.iter()
    }

    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.triples.iter().flat_map(|&(s, _, o)| [s, o]).collect()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Reads a `subject<TAB>property<TAB>object` fact file and an optional
    /// `qcode<TAB>lang<TAB>label` file. `wd:`/`wdt:` prefixes are accepted.
    pub fn load(triples: &Path, labels: Option<&Path>) -> Result<Self, String> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| format!("reading {}: {e}", p.display()));
        let mut snapshot = Self::new();
        for (line, cols) in rows(&read(triples)?) {
            let [s, p, o] = cols.as_slice() else {
                return Err(format!("{}:{line}: expected 3 columns", triples.display()));
            };
            let bad = |e: crate::sparql::SparqlError| format!("{}:{line}: {e}", triples.display());
            snapshot.insert(
                s.trim_start_matches("wd:").parse().map_err(bad)?,
                p.trim_start_matches("wdt:").parse().map_err(bad)?,
                o.trim_start_matches("wd:").parse().map_err(bad)?,
            );
        }
        if let Some(path) = labels {
            for (line, cols) in rows(&read(path)?) {
                let [q, lang, label] = cols.as_slice() else {
                    return Err(format!("{}:{line}: expected 3 columns", path.display()));
                };
                let q: EntityId =
                    q.trim_start_matches("wd:").parse().map_err(|e| format!("{}:{line}: {e}", path.display()))?;
                snapshot.set_label(q, lang, *label);
            }
        }
        Ok(snapshot)
    }
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        (!l.trim().is_empty() && !l.starts_with('#')).then(|| (i + 1, l.split('\t').collect()))
    })
}

impl QueryService for TripleStoreSnapshot {
    fn execute(&self, query: &Query) -> Result<QueryResult, EndpointError> {
        evaluate_local(self, query)
    }

    fn labels(&self, entities: &[EntityId], language: &str) -> Result<BTreeMap<EntityId, String>, EndpointError> {
        Ok(entities.iter().filter_map(|&e| self.label(e, language).map(|l| (e, l.to_string()))).collect())
    }
}

/// Slot for a triple position: a fixed entity or a variable index.
#[derive(Clone, Copy)]
enum Slot {
    Fixed(EntityId),
    Var(usize),
}

struct Plan {
    vars: Vec<String>,
    edges: Vec<(Slot, PropertyId, Slot)>,
    filters: Vec<(Slot, Slot)>,
}

fn compile(query: &Query) -> Result<Plan, EndpointError> {
    if query.dialect != Dialect::Wikidata {
        return Err(EndpointError::Unsupported("only wikidata-dialect queries can be evaluated".into()));
    }
    let mut vars: Vec<String> = Vec::new();
    let mut slot = |t: &Term| -> Result<Slot, EndpointError> {
        match t {
            Term::Entity(e) => Ok(Slot::Fixed(*e)),
            Term::Variable(v) => {
                let idx = vars.iter().position(|n| n == v.name()).unwrap_or_else(|| {
                    vars.push(v.name().to_string());
                    vars.len() - 1
                });
                Ok(Slot::Var(idx))
            }
            Term::Placeholder(p) => Err(EndpointError::Unsupported(format!("unbound placeholder {p}"))),
            other => Err(EndpointError::Unsupported(format!("term {other}"))),
        }
    };
    let mut edges = Vec::new();
    for triple in &query.triples {
        let TriplePattern::Edge { subject, path, object } = triple else {
            return Err(EndpointError::Unsupported("type assertion".into()));
        };
        let [step] = path.steps.as_slice() else {
            return Err(EndpointError::Unsupported("property path".into()));
        };
        let Term::Property(p) = step.property else {
            return Err(EndpointError::Unsupported(format!("property {}", step.property)));
        };
        let (s, o) = (slot(subject)?, slot(object)?);
        edges.push(if step.reversed { (o, p, s) } else { (s, p, o) });
    }
    let filters =
        query.filters.iter().map(|f| Ok((slot(&f.left)?, slot(&f.right)?))).collect::<Result<_, EndpointError>>()?;
    Ok(Plan { vars, edges, filters })
}

struct Search<'a> {
    snapshot: &'a TripleStoreSnapshot,
    plan: &'a Plan,
    /// Variables that occur in some triple; the rest stay unbound.
    in_triples: Vec<bool>,
    explored: u64,
    bound: u64,
    solutions: Vec<Vec<Option<EntityId>>>,
}

impl Search<'_> {
    fn value(assign: &[Option<EntityId>], s: Slot) -> Option<EntityId> {
        match s {
            Slot::Fixed(e) => Some(e),
            Slot::Var(i) => assign[i],
        }
    }

    /// Filters whose operands are all bound must hold; an unbound operand
    /// after all triples are matched makes the filter false.
    fn filters_ok(&self, assign: &[Option<EntityId>], complete: bool) -> bool {
        self.plan.filters.iter().all(|&(l, r)| match (Self::value(assign, l), Self::value(assign, r)) {
            (Some(a), Some(b)) => a != b,
            _ => !complete,
        })
    }

    fn run(&mut self, depth: usize, assign: &mut Vec<Option<EntityId>>) -> Result<(), EndpointError> {
        self.explored += 1;
        if self.explored > self.bound {
            return Err(EndpointError::Capacity { bound: self.bound });
        }
        if !self.filters_ok(assign, false) {
            return Ok(());
        }
        let Some(&(s, p, o)) = self.plan.edges.get(depth) else {
            if self.filters_ok(assign, true) {
                self.solutions.push(assign.clone());
            }
            return Ok(());
        };
        let candidates: Vec<(EntityId, EntityId)> = match (Self::value(assign, s), Self::value(assign, o)) {
            (Some(a), Some(b)) => {
                if self.snapshot.contains(a, p, b) {
                    vec![(a, b)]
                } else {
                    vec![]
                }
            }
            (Some(a), None) => {
                self.snapshot.by_subject.get(&(a, p)).map_or(vec![], |os| os.iter().map(|&b| (a, b)).collect())
            }
            (None, Some(b)) => {
                self.snapshot.by_object.get(&(p, b)).map_or(vec![], |ss| ss.iter().map(|&a| (a, b)).collect())
            }
            (None, None) => self.snapshot.by_property.get(&p).map_or(vec![], |ps| ps.iter().copied().collect()),
        };
        for (a, b) in candidates {
            let saved = assign.clone();
            let mut consistent = true;
            for (slot, val) in [(s, a), (o, b)] {
                if let Slot::Var(i) = slot {
                    match assign[i] {
                        Some(prev) if prev != val => consistent = false,
                        _ => assign[i] = Some(val),
                    }
                }
            }
            if consistent {
                self.run(depth + 1, assign)?;
            }
            *assign = saved;
        }
        Ok(())
    }
}

/// Evaluates a concrete Wikidata-dialect query against the snapshot by
/// backtracking over the triple patterns in order.
///
/// Results follow SPARQL semantics for this subset: SELECT rows are
/// solution multisets (deduplicated under DISTINCT), `ORDER BY` sorts on the
/// IRI text, and `LIMIT` truncates after ordering.
pub fn evaluate_local(snapshot: &TripleStoreSnapshot, query: &Query) -> Result<QueryResult, EndpointError> {
    let plan = compile(query)?;
    let mut in_triples = vec![false; plan.vars.len()];
    for &(s, _, o) in &plan.edges {
        for slot in [s, o] {
            if let Slot::Var(i) = slot {
                in_triples[i] = true;
            }
        }
    }
    let mut search =
        Search { snapshot, plan: &plan, in_triples, explored: 0, bound: snapshot.bound, solutions: Vec::new() };
    let mut assign = vec![None; plan.vars.len()];
    search.run(0, &mut assign)?;
    debug_assert!(search.solutions.iter().all(|s| s.iter().zip(&search.in_triples).all(|(v, t)| v.is_some() == *t)));

    match &query.form {
        QueryForm::Ask => Ok(QueryResult::Boolean(!search.solutions.is_empty())),
        QueryForm::SelectCount => Err(EndpointError::Unsupported("count(*)".into())),
        QueryForm::Select { distinct, projection } => {
            let to_row = |sol: &Vec<Option<EntityId>>| -> Row {
                projection
                    .iter()
                    .filter_map(|v| {
                        let i = plan.vars.iter().position(|n| n == v.name())?;
                        sol[i].map(|e| (v.name().to_string(), Value::Entity(e)))
                    })
                    .collect()
            };
            let mut rows: Vec<Row> = search.solutions.iter().map(to_row).collect();
            if *distinct {
                let mut seen = BTreeSet::new();
                rows.retain(|r| seen.insert(r.clone()));
            }
            if !query.order_by.is_empty() {
                let key = |r: &Row| -> Vec<Option<String>> {
                    query.order_by.iter().map(|v| r.get(v.name()).map(Value::sort_key)).collect()
                };
                rows.sort_by_cached_key(key);
            }
            if let Some(n) = query.limit {
                rows.truncate(n as usize);
            }
            Ok(QueryResult::Rows(rows))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::parse_query;

    fn wd(s: &str) -> Query {
        parse_query(s, Dialect::Wikidata).unwrap()
    }

    fn snap(facts: &[(u64, u64, u64)]) -> TripleStoreSnapshot {
        TripleStoreSnapshot::from_triples(facts.iter().map(|&(s, p, o)| (EntityId(s), PropertyId(p), EntityId(o))))
    }

    #[test]
    fn ask_matches_present_fact_only() {
        let s = snap(&[(1, 57, 2)]);
        assert_eq!(evaluate_local(&s, &wd("ASK WHERE { ?x0 wdt:P57 wd:Q2 }")).unwrap(), QueryResult::Boolean(true));
        assert_eq!(evaluate_local(&s, &wd("ASK WHERE { ?x0 wdt:P58 wd:Q2 }")).unwrap(), QueryResult::Boolean(false));
        assert_eq!(evaluate_local(&s, &wd("ASK WHERE { }")).unwrap(), QueryResult::Boolean(true));
    }

    #[test]
    fn empty_snapshot_yields_no_rows() {
        let q = wd("SELECT ?v0 WHERE { ?x0 wdt:P57 ?v0 } LIMIT 1");
        assert_eq!(evaluate_local(&TripleStoreSnapshot::new(), &q).unwrap(), QueryResult::Rows(vec![]));
    }

    #[test]
    fn filters_and_ordering() {
        let s = snap(&[(1, 57, 2), (1, 57, 10), (1, 57, 1), (3, 57, 2)]);
        let q = wd("SELECT ?v0 WHERE { wd:Q1 wdt:P57 ?v0 . FILTER ( ?v0 != wd:Q1 ) } ORDER BY ?v0");
        let QueryResult::Rows(rows) = evaluate_local(&s, &q).unwrap() else { panic!() };
        // IRIs sort by text, so Q10 precedes Q2.
        let got: Vec<_> = rows.iter().map(|r| r["v0"].clone()).collect();
        assert_eq!(got, vec![Value::Entity(EntityId(10)), Value::Entity(EntityId(2))]);
    }

    #[test]
    fn select_keeps_duplicates_unless_distinct() {
        let s = snap(&[(1, 57, 2), (3, 57, 2)]);
        let QueryResult::Rows(rows) = evaluate_local(&s, &wd("SELECT ?y WHERE { ?x wdt:P57 ?y }")).unwrap() else {
            panic!()
        };
        assert_eq!(rows.len(), 2);
        let QueryResult::Rows(rows) = evaluate_local(&s, &wd("SELECT DISTINCT ?y WHERE { ?x wdt:P57 ?y }")).unwrap()
        else {
            panic!()
        };
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn filter_on_unbound_variable_is_false() {
        let s = snap(&[(1, 57, 2)]);
        let q = wd("ASK WHERE { ?x wdt:P57 ?y . FILTER ( ?z != ?y ) }");
        assert_eq!(evaluate_local(&s, &q).unwrap(), QueryResult::Boolean(false));
    }

    #[test]
    fn placeholders_are_rejected() {
        let err = evaluate_local(&TripleStoreSnapshot::new(), &wd("ASK WHERE { ?x wdt:P57 M0 }")).unwrap_err();
        assert!(matches!(err, EndpointError::Unsupported(_)));
    }

    #[test]
    fn capacity_bound_enforced() {
        let facts: Vec<_> = (1..=20).flat_map(|a| (1..=20).map(move |b| (a, 1, b))).collect();
        let s = snap(&facts).with_bound(1000);
        let q = wd("SELECT ?a WHERE { ?a wdt:P1 ?b . ?c wdt:P1 ?d . ?e wdt:P1 ?f }");
        assert_eq!(evaluate_local(&s, &q).unwrap_err(), EndpointError::Capacity { bound: 1000 });
    }

    #[test]
    fn duplicate_insert_ignored() {
        let mut s = TripleStoreSnapshot::new();
        assert!(s.insert(EntityId(1), PropertyId(2), EntityId(3)));
        assert!(!s.insert(EntityId(1), PropertyId(2), EntityId(3)));
        assert_eq!(s.len(), 1);
    }
}
