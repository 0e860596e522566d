use std::collections::{BTreeMap, HashSet};

use super::ast::{Dialect, Query, TriplePattern};
use super::term::{EntityId, Placeholder, PropertyId, Term};
use super::SparqlError;

/// Counted multiset; iteration is in key order so results are deterministic.
pub type Multiset<T> = BTreeMap<T, usize>;

/// Placeholder → entity assignment, ordered by placeholder.
pub type Bindings = BTreeMap<Placeholder, EntityId>;

fn require_wikidata(q: &Query) -> Result<(), SparqlError> {
    if q.dialect != Dialect::Wikidata {
        return Err(SparqlError::WrongDialect { expected: Dialect::Wikidata, found: q.dialect });
    }
    Ok(())
}

/// One occurrence per path step across all triples.
pub fn extract_properties(q: &Query) -> Result<Multiset<PropertyId>, SparqlError> {
    require_wikidata(q)?;
    let mut out = Multiset::new();
    for triple in &q.triples {
        if let TriplePattern::Edge { path, .. } = triple {
            for step in &path.steps {
                if let Term::Property(p) = step.property {
                    *out.entry(p).or_default() += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Q-codes and placeholders in subject/object positions. Variables and
/// filter operands are not counted.
pub fn extract_entities(q: &Query) -> Result<Multiset<Term>, SparqlError> {
    require_wikidata(q)?;
    let mut out = Multiset::new();
    for term in q.triples.iter().flat_map(|t| t.terms()) {
        if matches!(term, Term::Entity(_) | Term::Placeholder(_)) {
            *out.entry(term.clone()).or_default() += 1;
        }
    }
    Ok(out)
}

/// Placeholders in first-appearance order over triples, then filters.
pub fn placeholders(q: &Query) -> Vec<Placeholder> {
    let mut seen = Vec::new();
    for term in q.terms() {
        if let Term::Placeholder(p) = term {
            if !seen.contains(p) {
                seen.push(*p);
            }
        }
    }
    seen
}

/// Replaces every distinct non-special entity with a fresh placeholder,
/// numbered `M0, M1, ...` in first-appearance order.
pub fn mod_entities(q: &Query, is_special: impl Fn(EntityId) -> bool) -> Result<(Query, Bindings), SparqlError> {
    let taken: HashSet<u32> = placeholders(q).into_iter().map(|p| p.0).collect();
    let fresh = (0..).filter(|n| !taken.contains(n)).map(Placeholder);
    substitute_entities(q, is_special, fresh)
}

/// Like [`mod_entities`] but assigns the given labels, in order, to the
/// entities in first-appearance order. Used to keep a source entry's labels
/// (`M0`, `M2`, ...) instead of renumbering.
pub fn mod_entities_with_labels(
    q: &Query,
    is_special: impl Fn(EntityId) -> bool,
    labels: &[Placeholder],
) -> Result<(Query, Bindings), SparqlError> {
    let distinct: HashSet<_> = labels.iter().collect();
    if distinct.len() != labels.len() {
        return Err(SparqlError::Invariant("placeholder labels must be distinct".into()));
    }
    let (pattern, bindings) = substitute_entities(q, &is_special, labels.iter().copied())?;
    if bindings.len() != labels.len() {
        return Err(SparqlError::Invariant(format!(
            "{} placeholder labels supplied for {} entities",
            labels.len(),
            bindings.len()
        )));
    }
    Ok((pattern, bindings))
}

fn substitute_entities(
    q: &Query,
    is_special: impl Fn(EntityId) -> bool,
    mut labels: impl Iterator<Item = Placeholder>,
) -> Result<(Query, Bindings), SparqlError> {
    require_wikidata(q)?;
    let mut assigned: Vec<(EntityId, Placeholder)> = Vec::new();
    let mut exhausted = false;
    let mut pattern = q.clone();
    pattern.for_each_term_mut(|term| {
        let Term::Entity(e) = *term else { return };
        if is_special(e) {
            return;
        }
        let label = match assigned.iter().find(|(seen, _)| *seen == e) {
            Some((_, p)) => *p,
            None => match labels.next() {
                Some(p) => {
                    assigned.push((e, p));
                    p
                }
                None => {
                    exhausted = true;
                    return;
                }
            },
        };
        *term = Term::Placeholder(label);
    });
    if exhausted {
        return Err(SparqlError::Invariant("more entities than placeholder labels".into()));
    }
    let bindings = assigned.into_iter().map(|(e, p)| (p, e)).collect();
    Ok((pattern, bindings))
}

/// Substitutes bound placeholders with their entities; unbound placeholders
/// are left in place.
pub fn bind_placeholders(pattern: &Query, bindings: &Bindings) -> Query {
    let mut q = pattern.clone();
    q.for_each_term_mut(|term| {
        if let Term::Placeholder(p) = term {
            if let Some(e) = bindings.get(p) {
                *term = Term::Entity(*e);
            }
        }
    });
    q
}

/// Recovers the bindings that turn `pattern` into `concrete`, if the two are
/// structurally identical apart from placeholder positions. The recovered
/// assignment must be a function and injective.
pub fn align_bindings(pattern: &Query, concrete: &Query) -> Option<Bindings> {
    if pattern.form != concrete.form
        || pattern.dialect != concrete.dialect
        || pattern.triples.len() != concrete.triples.len()
        || pattern.filters.len() != concrete.filters.len()
        || pattern.order_by != concrete.order_by
        || pattern.limit != concrete.limit
    {
        return None;
    }
    for (a, b) in pattern.triples.iter().zip(&concrete.triples) {
        match (a, b) {
            (TriplePattern::Edge { path: pa, .. }, TriplePattern::Edge { path: pb, .. }) if pa == pb => {}
            (TriplePattern::TypeAssertion { .. }, TriplePattern::TypeAssertion { .. }) => {}
            _ => return None,
        }
    }
    let mut bindings = Bindings::new();
    let mut used = HashSet::new();
    for (a, b) in pattern.terms().zip(concrete.terms()) {
        match (a, b) {
            (Term::Placeholder(p), Term::Entity(e)) => match bindings.get(p) {
                Some(prev) if prev != e => return None,
                Some(_) => {}
                None => {
                    if !used.insert(*e) {
                        return None;
                    }
                    bindings.insert(*p, *e);
                }
            },
            (x, y) if x == y => {}
            _ => return None,
        }
    }
    // A placeholder's entity must not also appear verbatim elsewhere.
    if pattern.terms().any(|t| matches!(t, Term::Entity(e) if used.contains(e))) {
        return None;
    }
    Some(bindings)
}

/// Copy of `q` with triples and filters sorted by their canonical text.
pub fn normalized(q: &Query) -> Query {
    let mut q = q.clone();
    q.triples.sort_by_cached_key(|t| t.to_string());
    q.filters.sort_by_cached_key(|f| f.to_string());
    q
}
