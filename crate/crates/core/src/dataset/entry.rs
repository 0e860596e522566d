use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::grounding::QueryResult;
use crate::sparql::{mod_entities_with_labels, parse_query, placeholders, Dialect, EntityId, QueryForm};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QuestionKind {
    YesNo,
    Wh,
}

impl QuestionKind {
    pub fn of_form(form: &QueryForm) -> Self {
        match form {
            QueryForm::Ask | QueryForm::SelectCount => QuestionKind::YesNo,
            QueryForm::Select { .. } => QuestionKind::Wh,
        }
    }
}

/// One grounded question/query record. Question fields are keyed by
/// language code (`en`, `he`, `kn`, `zh`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetEntry {
    pub id: u64,
    pub question_with_brackets: BTreeMap<String, String>,
    pub question_pattern_mod_entities: BTreeMap<String, String>,
    pub sparql: String,
    pub sparql_pattern_mod_entities: String,
    pub recursion_depth: u32,
    pub expected_response: QueryResult,
    pub question_kind: QuestionKind,
    /// Set on generated "no" entries: the id of the entry they were derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_of: Option<u64>,
}

impl DatasetEntry {
    pub fn question(&self, language: &str) -> Option<&str> {
        self.question_with_brackets.get(language).map(String::as_str)
    }

    /// Checks the record against its own fields: both queries parse in the
    /// Wikidata dialect, the pattern is the query with its non-special
    /// entities replaced (keeping the pattern's labels), and the question
    /// kind agrees with the query form.
    pub fn validate(&self, is_special: impl Fn(EntityId) -> bool) -> Result<(), DatasetError> {
        let invalid = |message: String| DatasetError::InvalidEntry { id: self.id, message };
        let sparql = parse_query(&self.sparql, Dialect::Wikidata).map_err(|e| invalid(format!("sparql: {e}")))?;
        let pattern = parse_query(&self.sparql_pattern_mod_entities, Dialect::Wikidata)
            .map_err(|e| invalid(format!("sparqlPatternModEntities: {e}")))?;
        let labels = placeholders(&pattern);
        let (derived, _) = mod_entities_with_labels(&sparql, is_special, &labels)
            .map_err(|e| invalid(format!("pattern mismatch: {e}")))?;
        if derived.to_string() != self.sparql_pattern_mod_entities {
            return Err(invalid(format!("pattern mismatch: derived `{derived}`")));
        }
        if QuestionKind::of_form(&sparql.form) != self.question_kind {
            return Err(invalid("questionKind disagrees with the query form".into()));
        }
        if self.sparql != sparql.to_string() {
            return Err(invalid("sparql is not in canonical form".into()));
        }
        Ok(())
    }
}

/// A migrated but not yet grounded pattern record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MigratedEntry {
    pub id: u64,
    pub question_pattern_mod_entities: String,
    pub sparql_pattern_mod_entities: String,
    pub recursion_depth: u32,
    pub question_kind: QuestionKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplexityMeasures {
    pub recursion_depth: Option<u32>,
}

/// A Freebase-dialect source record. Only the fields the pipeline uses are
/// read; others are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceEntry {
    #[serde(default)]
    pub id: Option<u64>,
    pub question_pattern_mod_entities: String,
    pub sparql_pattern_mod_entities: String,
    #[serde(default)]
    pub recursion_depth: Option<u32>,
    #[serde(default)]
    pub complexity_measures: Option<ComplexityMeasures>,
}

impl SourceEntry {
    /// Top-level `recursionDepth`, else `complexityMeasures.recursionDepth`.
    pub fn depth(&self) -> Option<u32> {
        self.recursion_depth.or_else(|| self.complexity_measures.as_ref()?.recursion_depth)
    }
}

/// Reads JSON-lines records; blank lines are skipped. Errors carry the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Json { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Like [`read_jsonl`] but also returns each record's 0-based line index.
pub fn read_jsonl_indexed<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(u64, T)>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| DatasetError::Json { line: i + 1, message: e.to_string() })?;
        out.push((i as u64, record));
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    mut writer: impl Write,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), DatasetError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(|e| DatasetError::Io(e.to_string()))?;
        writer.write_all(b"\n").map_err(|e| DatasetError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| DatasetError::Io(e.to_string()))
}
