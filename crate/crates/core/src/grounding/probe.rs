use std::collections::HashSet;

use crate::sparql::{placeholders, FilterClause, Placeholder, Query, QueryForm, Term, Variable};

/// A pattern together with the query used to find entities for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundingQuery {
    pub base_pattern: Query,
    /// Placeholders turned into `?v` variables, with pairwise distinctness
    /// filters and `LIMIT 1`. With no placeholders this is the pattern as an
    /// `ASK` query.
    pub probe: Query,
    /// `(?vi, Mi)` in placeholder first-appearance order.
    pub placeholder_order: Vec<(Variable, Placeholder)>,
}

impl GroundingQuery {
    pub fn variable_for(&self, p: Placeholder) -> Option<&Variable> {
        self.placeholder_order.iter().find(|(_, q)| *q == p).map(|(v, _)| v)
    }
}

/// Builds the probe for a Wikidata-dialect pattern.
///
/// Each placeholder becomes a fresh `?v` variable numbered by first
/// appearance. Existing filters are carried over with placeholders
/// substituted; a `?vi != ?vj` filter is appended for every pair of
/// introduced variables not already constrained. With `deterministic` the
/// probe is ordered by the introduced variables so the first row is stable.
pub fn build_grounding_query(pattern: &Query, deterministic: bool) -> GroundingQuery {
    let slots = placeholders(pattern);
    if slots.is_empty() {
        let mut probe = pattern.clone();
        probe.form = QueryForm::Ask;
        probe.order_by.clear();
        probe.limit = None;
        return GroundingQuery { base_pattern: pattern.clone(), probe, placeholder_order: Vec::new() };
    }

    let taken: HashSet<String> = pattern.variables().iter().map(|v| v.name().to_string()).collect();
    let mut fresh = (0..).map(|i| format!("v{i}")).filter(|n| !taken.contains(n));
    let placeholder_order: Vec<(Variable, Placeholder)> =
        slots.iter().map(|&p| (Variable::new(fresh.next().expect("unbounded")).expect("valid name"), p)).collect();

    let mut probe = pattern.clone();
    probe.for_each_term_mut(|term| {
        if let Term::Placeholder(p) = term {
            let (v, _) = placeholder_order.iter().find(|(_, q)| q == p).expect("collected above");
            *term = Term::Variable(v.clone());
        }
    });
    let vars: Vec<Term> = placeholder_order.iter().map(|(v, _)| Term::Variable(v.clone())).collect();
    for (i, a) in vars.iter().enumerate() {
        for b in &vars[i + 1..] {
            if !probe.filters.iter().any(|f| f.same_pair(a, b)) {
                probe.filters.push(FilterClause::not_equal(a.clone(), b.clone()));
            }
        }
    }
    let projection: Vec<Variable> = placeholder_order.iter().map(|(v, _)| v.clone()).collect();
    probe.order_by = if deterministic { projection.clone() } else { Vec::new() };
    probe.form = QueryForm::Select { distinct: false, projection };
    probe.limit = Some(1);
    GroundingQuery { base_pattern: pattern.clone(), probe, placeholder_order }
}
