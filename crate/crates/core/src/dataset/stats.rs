use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DatasetEntry, QuestionKind};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetStats {
    pub unique_questions: usize,
    pub question_patterns: usize,
    pub unique_queries: usize,
    pub query_patterns: usize,
    pub yes_no_count: usize,
    pub wh_count: usize,
}

impl DatasetStats {
    /// `count` as a percentage of unique questions; 0 when there are none.
    pub fn percent(&self, count: usize) -> f64 {
        if self.unique_questions == 0 {
            0.0
        } else {
            100.0 * count as f64 / self.unique_questions as f64
        }
    }

    pub fn rows(&self) -> [(&'static str, usize); 6] {
        [
            ("uniqueQuestions", self.unique_questions),
            ("questionPatterns", self.question_patterns),
            ("uniqueQueries", self.unique_queries),
            ("queryPatterns", self.query_patterns),
            ("yesNo", self.yes_no_count),
            ("wh", self.wh_count),
        ]
    }

    /// `statistic<TAB>count<TAB>percent` with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("statistic\tcount\tpercent\n");
        for (name, count) in self.rows() {
            let _ = writeln!(out, "{name}\t{count}\t{:.2}", self.percent(count));
        }
        out
    }
}

/// Counts distinct questions, question patterns, queries and query patterns.
/// Questions and question patterns are keyed on `language`. A question text
/// shared by entries of both kinds counts once, as yes/no.
pub fn compute_stats<'a>(entries: impl IntoIterator<Item = &'a DatasetEntry>, language: &str) -> DatasetStats {
    let mut questions: BTreeMap<&str, BTreeSet<QuestionKind>> = BTreeMap::new();
    let mut question_patterns = HashSet::new();
    let mut queries = HashSet::new();
    let mut query_patterns = HashSet::new();
    for e in entries {
        if let Some(q) = e.question_with_brackets.get(language) {
            questions.entry(q.as_str()).or_default().insert(e.question_kind);
        }
        if let Some(p) = e.question_pattern_mod_entities.get(language) {
            question_patterns.insert(p.as_str());
        }
        queries.insert(e.sparql.as_str());
        query_patterns.insert(e.sparql_pattern_mod_entities.as_str());
    }
    let yes_no_count = questions.values().filter(|kinds| kinds.first() == Some(&QuestionKind::YesNo)).count();
    DatasetStats {
        unique_questions: questions.len(),
        question_patterns: question_patterns.len(),
        unique_queries: queries.len(),
        query_patterns: query_patterns.len(),
        yes_no_count,
        wh_count: questions.len() - yes_no_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::QueryResult;

    fn entry(id: u64, question: &str, sparql: &str, pattern: &str, kind: QuestionKind) -> DatasetEntry {
        DatasetEntry {
            id,
            question_with_brackets: [("en".to_string(), question.to_string())].into(),
            question_pattern_mod_entities: [("en".to_string(), "Did M0 direct M1".to_string())].into(),
            sparql: sparql.into(),
            sparql_pattern_mod_entities: pattern.into(),
            recursion_depth: 3,
            expected_response: QueryResult::Boolean(true),
            question_kind: kind,
            negative_of: None,
        }
    }

    #[test]
    fn shared_pattern_different_entities() {
        let p = "ASK WHERE { M0 wdt:P57 M1 }";
        let es = [
            entry(0, "Did [a] direct [b]", "ASK WHERE { wd:Q1 wdt:P57 wd:Q2 }", p, QuestionKind::YesNo),
            entry(1, "Did [c] direct [d]", "ASK WHERE { wd:Q3 wdt:P57 wd:Q4 }", p, QuestionKind::YesNo),
        ];
        let s = compute_stats(&es, "en");
        assert_eq!((s.unique_queries, s.query_patterns, s.question_patterns), (2, 1, 1));
        assert_eq!(s.yes_no_count + s.wh_count, s.unique_questions);
        assert_eq!(s.percent(s.yes_no_count), 100.0);
    }

    #[test]
    fn empty_input_has_zero_percentages() {
        let s = compute_stats(&[], "en");
        assert_eq!(s, DatasetStats::default());
        assert_eq!(s.percent(0), 0.0);
        assert!(s.to_tsv().starts_with("statistic\tcount\tpercent\nuniqueQuestions\t0\t0.00\n"));
    }
}
