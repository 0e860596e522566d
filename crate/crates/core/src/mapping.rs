//! Freebase → Wikidata query rewriting.
//!
//! Properties fall into three classes: *direct* ones map to a Wikidata
//! property as-is, *reverse* ones map to the inverse of a Wikidata property
//! (subject and object are swapped), and *unary* type assertions
//! (`?x a ns:film.director`) become an `occupation`-style triple pointing at a
//! class entity. Gender and nationality MIDs are part of the pattern and are
//! replaced through a fixed special-entity table.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparql::{
    Dialect, EntityId, FilterClause, Mid, PropertyId, PropertyPath, Query, QueryForm, Term, TriplePattern,
};

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate entry for `{key}`")]
    Duplicate { line: usize, key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Direct(PropertyId),
    /// The Freebase property is the inverse of this Wikidata property.
    Reverse(PropertyId),
    Unary {
        relation: PropertyId,
        class: EntityId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRule {
    pub freebase_property: String,
    pub kind: RuleKind,
}

/// Property rules keyed by the Freebase property (or `/`-joined path).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingTable {
    rules: BTreeMap<String, RuleKind>,
}

impl MappingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule; a key may only be defined once.
    pub fn insert(&mut self, rule: MappingRule) -> Result<(), MappingRule> {
        if self.rules.contains_key(&rule.freebase_property) {
            return Err(rule);
        }
        self.rules.insert(rule.freebase_property, rule.kind);
        Ok(())
    }

    pub fn get(&self, freebase_property: &str) -> Option<RuleKind> {
        self.rules.get(freebase_property).copied()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> impl Iterator<Item = MappingRule> + '_ {
        self.rules.iter().map(|(k, v)| MappingRule { freebase_property: k.clone(), kind: *v })
    }

    /// Parses `freebase_property<TAB>kind<TAB>arg1[<TAB>arg2]` rows.
    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let mut table = MappingTable::new();
        for (line, cols) in tsv_rows(text) {
            let malformed = |message: String| MappingError::Malformed { line, message };
            let prop = |s: &str| s.parse::<PropertyId>().map_err(|e| malformed(e.to_string()));
            let kind = match cols.as_slice() {
                [_, "direct", p] => RuleKind::Direct(prop(p)?),
                [_, "reverse", p] => RuleKind::Reverse(prop(p)?),
                [_, "unary", p, q] => RuleKind::Unary {
                    relation: prop(p)?,
                    class: q.parse().map_err(|e: crate::sparql::SparqlError| malformed(e.to_string()))?,
                },
                [_, kind, ..] if !matches!(*kind, "direct" | "reverse" | "unary") => {
                    return Err(malformed(format!("unknown rule kind `{kind}`")))
                }
                _ => return Err(malformed(format!("wrong column count ({})", cols.len()))),
            };
            let key = cols[0];
            if key.is_empty() {
                return Err(malformed("empty freebase property".into()));
            }
            table
                .insert(MappingRule { freebase_property: key.to_string(), kind })
                .map_err(|r| MappingError::Duplicate { line, key: r.freebase_property })?;
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecialCategory {
    Gender,
    Nationality,
}

impl std::str::FromStr for SpecialCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gender" => Ok(SpecialCategory::Gender),
            "nationality" => Ok(SpecialCategory::Nationality),
            other => Err(format!("unknown special-entity category `{other}`")),
        }
    }
}

/// MIDs that stay in patterns (genders, nationalities) and their Q-codes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpecialEntityMap {
    entries: BTreeMap<Mid, (EntityId, SpecialCategory)>,
}

impl SpecialEntityMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry. Within a category no two MIDs may share a Q-code.
    pub fn insert(&mut self, mid: Mid, qcode: EntityId, category: SpecialCategory) -> Result<(), String> {
        if self.entries.contains_key(&mid) {
            return Err(format!("duplicate entry for `{mid}`"));
        }
        if self.entries.values().any(|&(q, c)| q == qcode && c == category) {
            return Err(format!("{qcode} already mapped within category {category:?}"));
        }
        self.entries.insert(mid, (qcode, category));
        Ok(())
    }

    pub fn get(&self, mid: &Mid) -> Option<EntityId> {
        self.entries.get(mid).map(|&(q, _)| q)
    }

    pub fn is_special(&self, qcode: EntityId) -> bool {
        self.entries.values().any(|&(q, _)| q == qcode)
    }

    pub fn qcodes(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entries.values().map(|&(q, _)| q)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `mid<TAB>qcode<TAB>category` rows.
    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let mut map = SpecialEntityMap::new();
        for (line, cols) in tsv_rows(text) {
            let malformed = |message: String| MappingError::Malformed { line, message };
            let [mid, qcode, category] = cols.as_slice() else {
                return Err(malformed(format!("wrong column count ({})", cols.len())));
            };
            let mid: Mid = mid.parse().map_err(|e: crate::sparql::SparqlError| malformed(e.to_string()))?;
            let qcode: EntityId = qcode.parse().map_err(|e: crate::sparql::SparqlError| malformed(e.to_string()))?;
            let category: SpecialCategory = category.parse().map_err(malformed)?;
            map.insert(mid.clone(), qcode, category).map_err(|message| {
                if message.starts_with("duplicate") {
                    MappingError::Duplicate { line, key: mid.to_string() }
                } else {
                    MappingError::Malformed { line, message }
                }
            })?;
        }
        Ok(map)
    }
}

/// Non-empty, non-comment rows split on tabs, with 1-based line numbers.
fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

fn read(path: &Path) -> Result<String, MappingError> {
    fs::read_to_string(path).map_err(|source| MappingError::Io { path: path.display().to_string(), source })
}

/// Loads the property table and, when given, the special-entity table.
pub fn load_mapping(mapping: &Path, specials: Option<&Path>) -> Result<(MappingTable, SpecialEntityMap), MappingError> {
    let table = MappingTable::parse(&read(mapping)?)?;
    let specials = match specials {
        Some(path) => SpecialEntityMap::parse(&read(path)?)?,
        None => SpecialEntityMap::new(),
    };
    Ok((table, specials))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    ReverseMark,
    UnmappedProperty(String),
    /// A MID that is neither a placeholder nor a special entity.
    UnmappedEntity(String),
    UnsupportedForm,
}

impl RejectionReason {
    pub fn kind(&self) -> &'static str {
        match self {
            RejectionReason::ReverseMark => "ReverseMark",
            RejectionReason::UnmappedProperty(_) => "UnmappedProperty",
            RejectionReason::UnmappedEntity(_) => "UnmappedEntity",
            RejectionReason::UnsupportedForm => "UnsupportedForm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: RejectionReason,
    /// Freebase property (or path key) involved, when there is one.
    pub property: Option<String>,
    pub detail: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.reason.kind(), self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MigrationOutcome {
    Migrated(Query),
    Rejected(Rejection),
}

impl MigrationOutcome {
    pub fn migrated(&self) -> Option<&Query> {
        match self {
            MigrationOutcome::Migrated(q) => Some(q),
            MigrationOutcome::Rejected(_) => None,
        }
    }
}

fn migrate_term(term: &Term, specials: &SpecialEntityMap) -> Result<Term, Rejection> {
    match term {
        Term::Mid(mid) => specials.get(mid).map(Term::Entity).ok_or_else(|| Rejection {
            reason: RejectionReason::UnmappedEntity(mid.to_string()),
            property: None,
            detail: format!("ns:{mid} has no special-entity mapping"),
        }),
        Term::Variable(_) | Term::Placeholder(_) => Ok(term.clone()),
        other => Err(Rejection {
            reason: RejectionReason::UnsupportedForm,
            property: None,
            detail: format!("unexpected term {other} in entity position"),
        }),
    }
}

fn unmapped(key: &str) -> Rejection {
    Rejection {
        reason: RejectionReason::UnmappedProperty(key.to_string()),
        property: Some(key.to_string()),
        detail: format!("no mapping rule for `{key}`"),
    }
}

/// Rewrites one Freebase triple into Wikidata triples.
pub fn migrate_triple(
    triple: &TriplePattern,
    table: &MappingTable,
    specials: &SpecialEntityMap,
) -> Result<Vec<TriplePattern>, Rejection> {
    match triple {
        TriplePattern::Edge { subject, path, object } => {
            let key = path.key();
            if path.has_reverse_mark() {
                return Err(Rejection {
                    reason: RejectionReason::ReverseMark,
                    property: Some(key),
                    detail: format!("reverse mark in `{path}`"),
                });
            }
            let subject = migrate_term(subject, specials)?;
            let object = migrate_term(object, specials)?;
            let edge = |s: Term, p: PropertyId, o: Term| TriplePattern::Edge {
                subject: s,
                path: PropertyPath::single(Term::Property(p)),
                object: o,
            };
            match table.get(&key) {
                Some(RuleKind::Direct(p)) => Ok(vec![edge(subject, p, object)]),
                Some(RuleKind::Reverse(p)) => Ok(vec![edge(object, p, subject)]),
                Some(RuleKind::Unary { .. }) | None => Err(unmapped(&key)),
            }
        }
        TriplePattern::TypeAssertion { subject, class } => {
            let key = match class {
                Term::FreebaseProperty(name) => name.as_str().to_string(),
                other => other.to_string(),
            };
            match table.get(&key) {
                Some(RuleKind::Unary { relation, class }) => {
                    let subject = migrate_term(subject, specials)?;
                    Ok(vec![TriplePattern::Edge {
                        subject,
                        path: PropertyPath::single(Term::Property(relation)),
                        object: Term::Entity(class),
                    }])
                }
                _ => Err(unmapped(&key)),
            }
        }
    }
}

/// Rewrites a Freebase query into the Wikidata dialect, or explains why it
/// cannot be. `SELECT count(*)` becomes `ASK`; the first rejected triple
/// aborts the migration.
pub fn migrate_query(q: &Query, table: &MappingTable, specials: &SpecialEntityMap) -> MigrationOutcome {
    match migrate_query_inner(q, table, specials) {
        Ok(q) => MigrationOutcome::Migrated(q),
        Err(r) => MigrationOutcome::Rejected(r),
    }
}

fn migrate_query_inner(q: &Query, table: &MappingTable, specials: &SpecialEntityMap) -> Result<Query, Rejection> {
    let unsupported = |detail: &str| Rejection {
        reason: RejectionReason::UnsupportedForm,
        property: None,
        detail: detail.to_string(),
    };
    if q.dialect != Dialect::Freebase {
        return Err(unsupported("input is not a freebase-dialect query"));
    }
    let form = match &q.form {
        QueryForm::SelectCount => QueryForm::Ask,
        QueryForm::Select { distinct: true, projection } => {
            QueryForm::Select { distinct: true, projection: projection.clone() }
        }
        _ => return Err(unsupported("only SELECT count(*) and SELECT DISTINCT queries are migrated")),
    };
    let mut triples = Vec::with_capacity(q.triples.len());
    for triple in &q.triples {
        triples.extend(migrate_triple(triple, table, specials)?);
    }
    let filters = q
        .filters
        .iter()
        .map(|f| Ok(FilterClause { left: migrate_term(&f.left, specials)?, right: migrate_term(&f.right, specials)? }))
        .collect::<Result<Vec<_>, Rejection>>()?;
    let out =
        Query { dialect: Dialect::Wikidata, form, triples, filters, order_by: q.order_by.clone(), limit: q.limit };
    out.validate().map_err(|e| unsupported(&e.to_string()))?;
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationReport {
    pub total: usize,
    pub migrated: usize,
    pub rejected: usize,
    /// `migrated / total`; 0 for an empty input.
    pub survival_ratio: f64,
    pub by_reason: BTreeMap<String, usize>,
    pub by_property: BTreeMap<String, usize>,
}

pub fn migration_report<'a>(outcomes: impl IntoIterator<Item = &'a MigrationOutcome>) -> MigrationReport {
    let mut report = MigrationReport::default();
    let mut by_reason: HashMap<&'static str, usize> = HashMap::new();
    for outcome in outcomes {
        report.total += 1;
        match outcome {
            MigrationOutcome::Migrated(_) => report.migrated += 1,
            MigrationOutcome::Rejected(r) => {
                report.rejected += 1;
                *by_reason.entry(r.reason.kind()).or_default() += 1;
                if let Some(p) = &r.property {
                    *report.by_property.entry(p.clone()).or_default() += 1;
                }
            }
        }
    }
    report.by_reason = by_reason.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    report.survival_ratio = if report.total == 0 { 0.0 } else { report.migrated as f64 / report.total as f64 };
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::parse_query;

    const TABLE: &str = "# freebase\tkind\targs\n\
people.person.gender\tdirect\tP21\n\
film.director.film\treverse\tP57\n\
film.director\tunary\tP106\tQ2526255\n\
film.actor.film/film.performance.character\tdirect\tP453\n\
people.person.spouse_s/fictional_universe.marriage_of_fictional_characters.spouses\tdirect\tP26\n";

    const SPECIALS: &str = "m.05zppz\tQ6581097\tgender\nm.02zsn\tQ6581072\tgender\n";

    fn setup() -> (MappingTable, SpecialEntityMap) {
        (MappingTable::parse(TABLE).unwrap(), SpecialEntityMap::parse(SPECIALS).unwrap())
    }

    fn fb(s: &str) -> Query {
        parse_query(s, Dialect::Freebase).unwrap()
    }

    fn triple(s: &str) -> TriplePattern {
        fb(&format!("SELECT count(*) WHERE {{ {s} }}")).triples.remove(0)
    }

    #[test]
    fn parses_all_rule_kinds() {
        let (table, specials) = setup();
        assert_eq!(table.len(), 5);
        assert_eq!(table.get("people.person.gender"), Some(RuleKind::Direct(PropertyId(21))));
        assert_eq!(table.get("film.director.film"), Some(RuleKind::Reverse(PropertyId(57))));
        assert_eq!(
            table.get("film.director"),
            Some(RuleKind::Unary { relation: PropertyId(106), class: EntityId(2526255) })
        );
        assert_eq!(specials.len(), 2);
        assert!(MappingTable::parse("").unwrap().is_empty());
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let err = MappingTable::parse("a.b\tdirect\tP1\n\na.c\tsideways\tP2\n").unwrap_err();
        assert!(matches!(err, MappingError::Malformed { line: 3, .. }), "{err}");
        let err = MappingTable::parse("a.b\tdirect\tQ1\n").unwrap_err();
        assert!(matches!(err, MappingError::Malformed { line: 1, .. }));
        let err = MappingTable::parse("a.b\tunary\tP106\n").unwrap_err();
        assert!(matches!(err, MappingError::Malformed { line: 1, .. }));
        let err = MappingTable::parse("a.b\tdirect\tP1\na.b\treverse\tP2\n").unwrap_err();
        assert!(matches!(err, MappingError::Duplicate { line: 2, .. }));
        let err = SpecialEntityMap::parse("m.1\tQ1\tgender\nm.2\tQ1\tgender\n").unwrap_err();
        assert!(matches!(err, MappingError::Malformed { line: 2, .. }));
    }

    #[test]
    fn special_map_is_injective_per_category_only() {
        let mut m = SpecialEntityMap::new();
        m.insert("m.1".parse().unwrap(), EntityId(1), SpecialCategory::Gender).unwrap();
        assert!(m.insert("m.2".parse().unwrap(), EntityId(1), SpecialCategory::Gender).is_err());
        m.insert("m.3".parse().unwrap(), EntityId(1), SpecialCategory::Nationality).unwrap();
    }

    #[test]
    fn direct_rule_with_special_entity() {
        let (table, specials) = setup();
        let out = migrate_triple(&triple("?x0 ns:people.person.gender ns:m.05zppz"), &table, &specials).unwrap();
        assert_eq!(out[0].to_string(), "?x0 wdt:P21 wd:Q6581097");
    }

    #[test]
    fn unary_rule_becomes_occupation_triple() {
        let (table, specials) = setup();
        let out = migrate_triple(&triple("?x1 a ns:film.director"), &table, &specials).unwrap();
        assert_eq!(out[0].to_string(), "?x1 wdt:P106 wd:Q2526255");
    }

    #[test]
    fn reverse_rule_swaps_arguments() {
        let (table, specials) = setup();
        let out = migrate_triple(&triple("?x0 ns:film.director.film M1"), &table, &specials).unwrap();
        assert_eq!(out[0].to_string(), "M1 wdt:P57 ?x0");
    }

    #[test]
    fn reverse_mark_rejected() {
        let (table, specials) = setup();
        let err = migrate_triple(&triple("?x0 ^ns:people.person.gender M0"), &table, &specials).unwrap_err();
        assert_eq!(err.reason, RejectionReason::ReverseMark);
        assert_eq!(err.property.as_deref(), Some("people.person.gender"));
    }

    #[test]
    fn unmapped_property_named() {
        let (table, specials) = setup();
        let err = migrate_triple(&triple("?x0 ns:film.film.edited_by M0"), &table, &specials).unwrap_err();
        assert_eq!(err.reason, RejectionReason::UnmappedProperty("film.film.edited_by".into()));
        // A path is looked up as a whole, never step by step.
        let err = migrate_triple(&triple("?x0 ns:people.person.gender/ns:people.person.gender M0"), &table, &specials)
            .unwrap_err();
        assert!(matches!(err.reason, RejectionReason::UnmappedProperty(_)));
    }

    #[test]
    fn table_one_pattern_migrates_to_table_two_pattern() {
        let (table, specials) = setup();
        let q = fb("SELECT count(*) WHERE { ?x0 ns:film.actor.film/ns:film.performance.character M0 . ?x0 ns:people.person.gender ns:m.05zppz . ?x0 ns:people.person.spouse_s/ns:fictional_universe.marriage_of_fictional_characters.spouses M2 . FILTER (?x0 != M2)}");
        let MigrationOutcome::Migrated(out) = migrate_query(&q, &table, &specials) else { panic!() };
        assert_eq!(
            out.to_string(),
            "ASK WHERE { ?x0 wdt:P453 M0 . ?x0 wdt:P21 wd:Q6581097 . ?x0 wdt:P26 M2 . FILTER ( ?x0 != M2 ) }"
        );
        out.validate().unwrap();
    }

    #[test]
    fn select_distinct_preserved() {
        let (table, specials) = setup();
        let q = fb("SELECT DISTINCT ?x0 WHERE { ?x0 a ns:film.director . ?x0 ns:film.director.film M0 }");
        let out = migrate_query(&q, &table, &specials);
        assert_eq!(
            out.migrated().unwrap().to_string(),
            "SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P106 wd:Q2526255 . M0 wdt:P57 ?x0 }"
        );
    }

    #[test]
    fn unsupported_forms_and_unmapped_filter_mids() {
        let (table, specials) = setup();
        let plain = fb("SELECT ?x0 WHERE { ?x0 ns:people.person.gender M0 }");
        let MigrationOutcome::Rejected(r) = migrate_query(&plain, &table, &specials) else { panic!() };
        assert_eq!(r.reason, RejectionReason::UnsupportedForm);

        let q = fb("SELECT count(*) WHERE { ?x0 ns:people.person.gender M0 . FILTER ( ?x0 != ns:m.0hpnx3b ) }");
        let MigrationOutcome::Rejected(r) = migrate_query(&q, &table, &specials) else { panic!() };
        assert_eq!(r.reason, RejectionReason::UnmappedEntity("m.0hpnx3b".into()));
    }

    #[test]
    fn report_counts() {
        let ok = MigrationOutcome::Migrated(Query::ask(vec![], vec![]));
        let bad = MigrationOutcome::Rejected(Rejection {
            reason: RejectionReason::ReverseMark,
            property: Some("people.person.gender".into()),
            detail: String::new(),
        });
        let all = migration_report(&[ok.clone(), ok.clone()]);
        assert_eq!(all.survival_ratio, 1.0);
        let r = migration_report(&[ok.clone(), ok.clone(), ok, bad]);
        assert_eq!(r.survival_ratio, 0.75);
        assert_eq!(r.by_reason["ReverseMark"], 1);
        assert_eq!(r.by_property["people.person.gender"], 1);
    }
}
