//! Independent oracles and random generators shared by integration tests.
//! Nothing here calls the code under test except to build inputs.

#![allow(dead_code)]

use std::collections::BTreeSet;

use kbqa_core::grounding::{QueryResult, Row, TripleStoreSnapshot, Value};
use kbqa_core::sparql::{
    EntityId, FilterClause, Placeholder, PropertyId, Query, QueryForm, Term, TriplePattern, Variable,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Triple = (EntityId, PropertyId, EntityId);

pub struct ToyWorld {
    pub triples: BTreeSet<Triple>,
    pub entities: Vec<EntityId>,
    pub properties: Vec<PropertyId>,
}

impl ToyWorld {
    pub fn snapshot(&self) -> TripleStoreSnapshot {
        let mut s = TripleStoreSnapshot::from_triples(self.triples.iter().copied());
        for e in &self.entities {
            s.set_label(*e, "en", format!("entity {}", e.0));
        }
        s
    }

    pub fn universe(&self) -> Vec<EntityId> {
        let mut u: BTreeSet<EntityId> = BTreeSet::new();
        for (s, _, o) in &self.triples {
            u.insert(*s);
            u.insert(*o);
        }
        u.into_iter().collect()
    }
}

/// Up to 12 entities and 6 properties with a random edge set.
pub fn random_world(rng: &mut impl Rng) -> ToyWorld {
    let n_entities = rng.random_range(2..=12u64);
    let n_properties = rng.random_range(1..=6u64);
    let entities: Vec<EntityId> = (1..=n_entities).map(EntityId).collect();
    let properties: Vec<PropertyId> = (1..=n_properties).map(PropertyId).collect();
    let n_triples = rng.random_range(0..=(n_entities * 3) as usize);
    let mut triples = BTreeSet::new();
    for _ in 0..n_triples {
        triples.insert((
            *entities.choose(rng).unwrap(),
            *properties.choose(rng).unwrap(),
            *entities.choose(rng).unwrap(),
        ));
    }
    ToyWorld { triples, entities, properties }
}

fn var(i: usize) -> Variable {
    Variable::new(format!("x{i}")).unwrap()
}

/// A random Wikidata-dialect query over the world's vocabulary. With
/// `placeholders > 0` some positions hold `M0..` tokens instead.
pub fn random_query(rng: &mut impl Rng, world: &ToyWorld, placeholders: u32) -> Query {
    let n_vars = rng.random_range(1..=3usize);
    let n_triples = rng.random_range(1..=4usize);
    let pick_term = |rng: &mut dyn rand::RngCore| -> Term {
        let roll = rng.random_range(0..10);
        if placeholders > 0 && roll < 3 {
            Term::Placeholder(Placeholder(rng.random_range(0..placeholders)))
        } else if roll < 5 {
            Term::Entity(*world.entities.choose(rng).unwrap())
        } else {
            Term::Variable(var(rng.random_range(0..n_vars)))
        }
    };
    let mut triples = Vec::new();
    for _ in 0..n_triples {
        let s = pick_term(rng);
        let o = pick_term(rng);
        triples.push(TriplePattern::edge(s, Term::Property(*world.properties.choose(rng).unwrap()), o));
    }
    let mut q = Query::ask(triples, Vec::new());
    // Filters only over terms that occur in triples.
    let in_triples: Vec<Term> = q.triples.iter().flat_map(|t| t.terms()).cloned().collect();
    let vars: Vec<Variable> = q.variables();
    for _ in 0..rng.random_range(0..=2) {
        let a = in_triples.choose(rng).unwrap().clone();
        let b = in_triples.choose(rng).unwrap().clone();
        if a != b
            && (a.is_variable() || b.is_variable() || a.as_placeholder().is_some() || b.as_placeholder().is_some())
        {
            q.filters.push(FilterClause::not_equal(a, b));
        }
    }
    if !vars.is_empty() && rng.random_bool(0.6) {
        let mut projection: Vec<Variable> = vars.iter().filter(|_| rng.random_bool(0.6)).cloned().collect();
        if projection.is_empty() {
            projection.push(vars[0].clone());
        }
        let distinct = rng.random_bool(0.5);
        if rng.random_bool(0.3) {
            q.order_by = projection.clone();
            q.limit = Some(rng.random_range(1..=3));
        }
        q.form = QueryForm::Select { distinct, projection };
    }
    q
}

#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Fixed(EntityId),
}

/// Naive evaluation: every assignment of the query's triple variables (and
/// placeholders, treated as further variables) over `universe` is tried.
/// Placeholders must take pairwise distinct values outside `reserved`.
pub struct NaiveEval<'a> {
    pub triples: &'a BTreeSet<Triple>,
    pub universe: &'a [EntityId],
}

impl NaiveEval<'_> {
    fn slots(q: &Query) -> (Vec<Term>, usize) {
        let mut names: Vec<Term> = Vec::new();
        for t in q.triples.iter().flat_map(|t| t.terms()) {
            if (t.is_variable() || t.as_placeholder().is_some()) && !names.contains(t) {
                names.push(t.clone());
            }
        }
        let n = names.len();
        (names, n)
    }

    fn resolve(names: &[Term], t: &Term) -> Option<Slot> {
        match t {
            Term::Entity(e) => Some(Slot::Fixed(*e)),
            other => names.iter().position(|n| n == other).map(Slot::Var),
        }
    }

    /// Every satisfying assignment, in odometer order, as term → entity.
    pub fn assignments(&self, q: &Query, reserved: &BTreeSet<EntityId>) -> Vec<Vec<(Term, EntityId)>> {
        let (names, n) = Self::slots(q);
        let mut out = Vec::new();
        if self.universe.is_empty() && n > 0 {
            return out;
        }
        let mut idx = vec![0usize; n];
        loop {
            let value = |s: Slot| match s {
                Slot::Var(i) => self.universe[idx[i]],
                Slot::Fixed(e) => e,
            };
            let mut ok = true;
            for t in &q.triples {
                let TriplePattern::Edge { subject, path, object } = t else { panic!("toy queries use edges") };
                let Term::Property(p) = path.steps[0].property else { panic!() };
                let s = value(Self::resolve(&names, subject).unwrap());
                let o = value(Self::resolve(&names, object).unwrap());
                if !self.triples.contains(&(s, p, o)) {
                    ok = false;
                    break;
                }
            }
            if ok {
                for f in &q.filters {
                    match (Self::resolve(&names, &f.left), Self::resolve(&names, &f.right)) {
                        (Some(a), Some(b)) if value(a) != value(b) => {}
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if ok {
                let placeholder_values: Vec<EntityId> = names
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.as_placeholder().is_some())
                    .map(|(i, _)| self.universe[idx[i]])
                    .collect();
                let distinct: BTreeSet<_> = placeholder_values.iter().collect();
                if distinct.len() != placeholder_values.len() || placeholder_values.iter().any(|e| reserved.contains(e))
                {
                    ok = false;
                }
            }
            if ok {
                out.push(names.iter().cloned().zip(idx.iter().map(|&i| self.universe[i])).collect());
            }
            // Advance the odometer.
            let mut k = 0;
            loop {
                if k == n {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < self.universe.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    pub fn evaluate(&self, q: &Query) -> QueryResult {
        let found = self.assignments(q, &BTreeSet::new());
        match &q.form {
            QueryForm::Ask => QueryResult::Boolean(!found.is_empty()),
            QueryForm::Select { distinct, projection } => {
                let mut rows: Vec<Row> = Vec::new();
                for a in &found {
                    let row: Row = projection
                        .iter()
                        .filter_map(|v| {
                            a.iter()
                                .find(|(t, _)| *t == Term::Variable(v.clone()))
                                .map(|(_, e)| (v.name().to_string(), Value::Entity(*e)))
                        })
                        .collect();
                    if !(*distinct && rows.contains(&row)) {
                        rows.push(row);
                    }
                }
                if !q.order_by.is_empty() {
                    let key = |r: &Row| -> Vec<String> {
                        q.order_by
                            .iter()
                            .map(|v| match r.get(v.name()) {
                                Some(Value::Entity(e)) => format!("http://www.wikidata.org/entity/Q{}", e.0),
                                Some(Value::Literal(l)) => l.clone(),
                                None => String::new(),
                            })
                            .collect()
                    };
                    rows.sort_by_key(key);
                }
                if let Some(n) = q.limit {
                    rows.truncate(n as usize);
                }
                QueryResult::Rows(rows)
            }
            QueryForm::SelectCount => panic!("not in the wikidata dialect"),
        }
    }
}

/// Result equality that ignores row order when the query does not fix it.
pub fn same_result(q: &Query, a: &QueryResult, b: &QueryResult) -> bool {
    match (a, b) {
        (QueryResult::Rows(x), QueryResult::Rows(y)) if q.order_by.is_empty() => {
            let mut x = x.clone();
            let mut y = y.clone();
            x.sort();
            y.sort();
            x == y
        }
        _ => a == b,
    }
}

/// BLEU by direct n-gram enumeration: every hypothesis n-gram is matched by
/// scanning the reference list; clipping is done by consuming matches.
pub fn bleu_oracle(refs: &[&str], hyps: &[&str]) -> f64 {
    let mut correct = [0f64; 4];
    let mut total = [0f64; 4];
    let (mut sys_len, mut ref_len) = (0f64, 0f64);
    for (r, h) in refs.iter().zip(hyps) {
        let r: Vec<&str> = r.split_whitespace().collect();
        let h: Vec<&str> = h.split_whitespace().collect();
        sys_len += h.len() as f64;
        ref_len += r.len() as f64;
        for n in 1..=4 {
            let mut available: Vec<&[&str]> = if r.len() >= n { r.windows(n).collect() } else { Vec::new() };
            if h.len() >= n {
                for g in h.windows(n) {
                    total[n - 1] += 1.0;
                    if let Some(pos) = available.iter().position(|x| *x == g) {
                        available.remove(pos);
                        correct[n - 1] += 1.0;
                    }
                }
            }
        }
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if total[n] == 0.0 { 0.0 } else { 100.0 * correct[n] / total[n] };
        log_sum += if p == 0.0 { -9_999_999_999.0 } else { f64::ln(p) };
    }
    let bp = if sys_len < ref_len {
        if sys_len > 0.0 {
            f64::exp(1.0 - ref_len / sys_len)
        } else {
            0.0
        }
    } else {
        1.0
    };
    bp * f64::exp(log_sum / 4.0)
}

/// (refs, hyps, score) computed beforehand with SacreBLEU 2.6
/// (`corpus_bleu(hyps, [refs], smooth_method='none', tokenize='none')`).
pub const BLEU_FIXTURES: [(&[&str], &[&str], f64); 5] = [
    (&["?x0 wdt:P58 M1"], &["?x0 wdt:P57 M1"], 0.0),
    (
        &["ASK WHERE { ?x0 wdt:P57 M1 . ?x0 wdt:P58 M1 }"],
        &["ASK WHERE { ?x0 wdt:P57 M1 . ?x0 wdt:P57 M1 }"],
        74.19446627365011,
    ),
    (
        &[
            "SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P26 M0 . ?x0 wdt:P21 wd:Q6581097 . FILTER ( ?x0 != M0 ) }",
            "ASK WHERE { M0 wdt:P57 M1 }",
        ],
        &["SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P26 M0 }", "ASK WHERE { M0 wdt:P57 M1 }"],
        47.042442201321236,
    ),
    (
        &["ASK WHERE { M0 wdt:P57 M1 . M0 wdt:P57 M2 . M0 wdt:P57 M3 . M0 wdt:P58 M1 . M0 wdt:P58 M2 . M0 wdt:P58 M3 }"],
        &["ASK WHERE { M0 wdt:P57 M1 . M1 wdt:P57 M2 . M0 wdt:P58 M3 }"],
        36.58634827543541,
    ),
    (
        &[
            "ASK WHERE { ?x0 wdt:P453 M0 . ?x0 wdt:P21 wd:Q6581097 . ?x0 wdt:P26 M2 . FILTER ( ?x0 != M2 ) }",
            "SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P57 M1 }",
            "ASK WHERE { M0 wdt:P106 wd:Q2526255 }",
        ],
        &[
            "ASK WHERE { ?x0 wdt:P453 M0 . ?x0 wdt:P21 wd:Q6581072 . ?x0 wdt:P26 M2 . ?x0 wdt:P26 M1 . FILTER ( ?x0 != M2 ) }",
            "SELECT DISTINCT ?x0 WHERE { ?x0 wdt:P58 M1 }",
            "ASK WHERE { M0 wdt:P106 wd:Q2526255 }",
        ],
        73.17722987139014,
    ),
];

/// SacreBLEU 2.6 with `smooth_method='exp'` on a pair with no matching
/// bigrams: refs, hyps, score.
pub const BLEU_EXP_FIXTURE: (&str, &str, f64) =
    ("M0 wdt:P58 M2 . M1 wdt:P57 M3", "M0 wdt:P57 M1 . M2 wdt:P58 M3", 10.682175159905853);
