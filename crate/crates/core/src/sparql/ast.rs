use std::fmt;

use serde::{Deserialize, Serialize};

use super::term::{Term, Variable};
use super::SparqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Freebase,
    Wikidata,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dialect::Freebase => f.write_str("freebase"),
            Dialect::Wikidata => f.write_str("wikidata"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathStep {
    pub property: Term,
    pub reversed: bool,
}

impl PathStep {
    pub fn forward(property: Term) -> Self {
        PathStep { property, reversed: false }
    }
}

/// A `/`-joined sequence of property steps, each optionally `^`-reversed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropertyPath {
    pub steps: Vec<PathStep>,
}

impl PropertyPath {
    pub fn single(property: Term) -> Self {
        PropertyPath { steps: vec![PathStep::forward(property)] }
    }

    pub fn has_reverse_mark(&self) -> bool {
        self.steps.iter().any(|s| s.reversed)
    }

    /// Path steps joined with `/`, without prefixes or reverse marks. This is
    /// the lookup key used by the mapping table.
    pub fn key(&self) -> String {
        self.steps
            .iter()
            .map(|s| match &s.property {
                Term::FreebaseProperty(n) => n.as_str().to_string(),
                other => other.to_string(),
            })
            .collect::<Vec<_>>()
            .join("/")
    }
}

impl fmt::Display for PropertyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            if step.reversed {
                f.write_str("^")?;
            }
            step.property.fmt(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TriplePattern {
    /// `subject path object`
    Edge { subject: Term, path: PropertyPath, object: Term },
    /// `subject a class`; Freebase dialect only.
    TypeAssertion { subject: Term, class: Term },
}

impl TriplePattern {
    pub fn edge(subject: Term, property: Term, object: Term) -> Self {
        TriplePattern::Edge { subject, path: PropertyPath::single(property), object }
    }

    pub fn subject(&self) -> &Term {
        match self {
            TriplePattern::Edge { subject, .. } | TriplePattern::TypeAssertion { subject, .. } => subject,
        }
    }

    /// Subject and object (or class) terms in written order.
    pub fn terms(&self) -> [&Term; 2] {
        match self {
            TriplePattern::Edge { subject, object, .. } => [subject, object],
            TriplePattern::TypeAssertion { subject, class } => [subject, class],
        }
    }

    pub(crate) fn terms_mut(&mut self) -> [&mut Term; 2] {
        match self {
            TriplePattern::Edge { subject, object, .. } => [subject, object],
            TriplePattern::TypeAssertion { subject, class } => [subject, class],
        }
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriplePattern::Edge { subject, path, object } => write!(f, "{subject} {path} {object}"),
            TriplePattern::TypeAssertion { subject, class } => write!(f, "{subject} a {class}"),
        }
    }
}

/// `FILTER ( left != right )`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilterClause {
    pub left: Term,
    pub right: Term,
}

impl FilterClause {
    pub fn not_equal(left: Term, right: Term) -> Self {
        FilterClause { left, right }
    }

    /// Same operands regardless of orientation.
    pub fn same_pair(&self, a: &Term, b: &Term) -> bool {
        (&self.left == a && &self.right == b) || (&self.left == b && &self.right == a)
    }
}

impl fmt::Display for FilterClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FILTER ( {} != {} )", self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryForm {
    /// `SELECT count(*)`; Freebase dialect only.
    SelectCount,
    /// `SELECT [DISTINCT] ?a ?b ...`
    Select { distinct: bool, projection: Vec<Variable> },
    /// `ASK`; Wikidata dialect only.
    Ask,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub dialect: Dialect,
    pub form: QueryForm,
    pub triples: Vec<TriplePattern>,
    pub filters: Vec<FilterClause>,
    pub order_by: Vec<Variable>,
    pub limit: Option<u64>,
}

impl Query {
    pub fn ask(triples: Vec<TriplePattern>, filters: Vec<FilterClause>) -> Self {
        Query { dialect: Dialect::Wikidata, form: QueryForm::Ask, triples, filters, order_by: Vec::new(), limit: None }
    }

    pub fn is_ask(&self) -> bool {
        matches!(self.form, QueryForm::Ask)
    }

    /// Every subject/object/class/filter term, in written order.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.triples.iter().flat_map(|t| t.terms()).chain(self.filters.iter().flat_map(|f| [&f.left, &f.right]))
    }

    /// Mutable counterpart of [`Query::terms`]; predicate steps are not visited.
    pub fn for_each_term_mut(&mut self, mut f: impl FnMut(&mut Term)) {
        for t in &mut self.triples {
            for term in t.terms_mut() {
                f(term);
            }
        }
        for filter in &mut self.filters {
            f(&mut filter.left);
            f(&mut filter.right);
        }
    }

    /// Variables in first-appearance order over triples then filters.
    pub fn variables(&self) -> Vec<Variable> {
        let mut seen = Vec::new();
        for term in self.terms() {
            if let Term::Variable(v) = term {
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
        seen
    }

    /// Checks the structural invariants of the query's dialect.
    pub fn validate(&self) -> Result<(), SparqlError> {
        let violation = |msg: String| Err(SparqlError::Invariant(msg));
        for filter in &self.filters {
            if filter.left == filter.right {
                return violation(format!("filter compares {} with itself", filter.left));
            }
        }
        if self.limit == Some(0) {
            return violation("LIMIT must be positive".into());
        }
        match self.dialect {
            Dialect::Wikidata => {
                if matches!(self.form, QueryForm::SelectCount) {
                    return violation("count(*) is not part of the wikidata dialect".into());
                }
                for triple in &self.triples {
                    match triple {
                        TriplePattern::TypeAssertion { .. } => {
                            return violation(format!("type assertion `{triple}` in wikidata dialect"))
                        }
                        TriplePattern::Edge { path, .. } => {
                            if path.steps.len() != 1 {
                                return violation(format!("multi-step path `{path}` in wikidata dialect"));
                            }
                            if !matches!(path.steps[0].property, Term::Property(_)) {
                                return violation(format!("non-wikidata property `{path}`"));
                            }
                        }
                    }
                }
                if let Some(t) = self.terms().find(|t| t.is_freebase_only() || matches!(t, Term::Property(_))) {
                    return violation(format!("term {t} not allowed in entity position"));
                }
            }
            Dialect::Freebase => {
                if matches!(self.form, QueryForm::Ask) {
                    return violation("ASK is not part of the freebase dialect".into());
                }
                for triple in &self.triples {
                    if let TriplePattern::Edge { path, .. } = triple {
                        if path.steps.iter().any(|s| !matches!(s.property, Term::FreebaseProperty(_))) {
                            return violation(format!("non-freebase property in `{path}`"));
                        }
                    }
                }
                if let Some(t) = self.terms().find(|t| t.is_wikidata_only()) {
                    return violation(format!("term {t} not allowed in freebase dialect"));
                }
            }
        }
        Ok(())
    }
}

/// Canonical serialization: one space between tokens, body elements joined
/// with ` . `, filters after triples.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            QueryForm::SelectCount => f.write_str("SELECT count(*) WHERE {")?,
            QueryForm::Select { distinct, projection } => {
                f.write_str("SELECT")?;
                if *distinct {
                    f.write_str(" DISTINCT")?;
                }
                for v in projection {
                    write!(f, " {v}")?;
                }
                f.write_str(" WHERE {")?;
            }
            QueryForm::Ask => f.write_str("ASK WHERE {")?,
        }
        let mut first = true;
        for triple in &self.triples {
            f.write_str(if first { " " } else { " . " })?;
            first = false;
            triple.fmt(f)?;
        }
        for filter in &self.filters {
            f.write_str(if first { " " } else { " . " })?;
            first = false;
            filter.fmt(f)?;
        }
        f.write_str(" }")?;
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY")?;
            for v in &self.order_by {
                write!(f, " {v}")?;
            }
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

pub fn serialize_query(q: &Query) -> String {
    q.to_string()
}
