//! Machine translation of question fields, with the question-mark protocol
//! and placeholder/bracket checks.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_jsonl, DatasetEntry};
use crate::par::parallel_map;
use crate::text::{bracket_groups, placeholder_multiset};

/// Terminal question marks removed after translation: ASCII, fullwidth and
/// Arabic-script.
pub const TERMINAL_MARKS: [char; 3] = ['?', '？', '؟'];

/// Environment variable holding the remote service credential.
pub const API_KEY_ENV: &str = "KBQA_TRANSLATE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslationError {
    #[error("text already ends with a question mark: {0:?}")]
    AlreadyTerminated(String),
    #[error("no translation for {input:?} into {target}")]
    NotFound { input: String, target: String },
    #[error("translation service: {0}")]
    Service(String),
    #[error("replay cache: {0}")]
    Cache(String),
    #[error("missing credential: set {0}")]
    MissingCredential(&'static str),
}

/// Appends the question mark sent to the translator.
pub fn prepare_for_mt(question: &str) -> Result<String, TranslationError> {
    if question.ends_with(TERMINAL_MARKS) {
        return Err(TranslationError::AlreadyTerminated(question.to_string()));
    }
    Ok(format!("{question}?"))
}

/// Drops trailing whitespace and then one terminal question mark.
pub fn postprocess_mt(translated: &str) -> String {
    let t = translated.trim_end();
    match t.chars().last() {
        Some(c) if TERMINAL_MARKS.contains(&c) => t[..t.len() - c.len_utf8()].to_string(),
        _ => t.to_string(),
    }
}

pub trait TranslationClient: Send + Sync {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslationError>;

    fn translate_batch(&self, texts: &[String], source: &str, target: &str) -> Result<Vec<String>, TranslationError> {
        texts.iter().map(|t| self.translate(t, source, target)).collect()
    }
}

impl<T: TranslationClient + ?Sized> TranslationClient for &T {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslationError> {
        (**self).translate(text, source, target)
    }

    fn translate_batch(&self, texts: &[String], source: &str, target: &str) -> Result<Vec<String>, TranslationError> {
        (**self).translate_batch(texts, source, target)
    }
}

/// Returns its input.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityClient;

impl TranslationClient for IdentityClient {
    fn translate(&self, text: &str, _source: &str, _target: &str) -> Result<String, TranslationError> {
        Ok(text.to_string())
    }
}

/// Fixed lookup table keyed by (target language, input text).
#[derive(Debug, Clone, Default)]
pub struct DictionaryClient {
    entries: HashMap<(String, String), String>,
}

impl DictionaryClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, target: &str, input: &str, output: &str) -> &mut Self {
        self.entries.insert((target.to_string(), input.to_string()), output.to_string());
        self
    }
}

impl TranslationClient for DictionaryClient {
    fn translate(&self, text: &str, _source: &str, target: &str) -> Result<String, TranslationError> {
        self.entries
            .get(&(target.to_string(), text.to_string()))
            .cloned()
            .ok_or_else(|| TranslationError::NotFound { input: text.to_string(), target: target.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub source: String,
    pub target_lang: String,
    pub input: String,
    pub output: String,
}

type CacheKey = (String, String, String);

/// Request/response pairs persisted as JSON lines. Reads share a lock;
/// appends to the file are serialized.
#[derive(Debug, Default)]
pub struct ReplayCache {
    records: RwLock<HashMap<CacheKey, String>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; new records are appended to it.
    pub fn open(path: &Path) -> Result<Self, TranslationError> {
        let cache_err = |e: std::io::Error| TranslationError::Cache(format!("{}: {e}", path.display()));
        let mut records = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(cache_err)?);
            let loaded: Vec<ReplayRecord> = read_jsonl(reader).map_err(|e| TranslationError::Cache(e.to_string()))?;
            for r in loaded {
                records.insert((r.input, r.source, r.target_lang), r.output);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(cache_err)?;
        Ok(ReplayCache { records: RwLock::new(records), file: Some(Mutex::new(file)), path: Some(path.to_path_buf()) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, input: &str, source: &str, target: &str) -> Option<String> {
        let key = (input.to_string(), source.to_string(), target.to_string());
        self.records.read().expect("cache poisoned").get(&key).cloned()
    }

    pub fn record(&self, record: ReplayRecord) -> Result<(), TranslationError> {
        let key = (record.input.clone(), record.source.clone(), record.target_lang.clone());
        {
            let mut records = self.records.write().expect("cache poisoned");
            if records.get(&key) == Some(&record.output) {
                return Ok(());
            }
            records.insert(key, record.output.clone());
        }
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&record).map_err(|e| TranslationError::Cache(e.to_string()))?;
            let mut file = file.lock().expect("cache poisoned");
            writeln!(file, "{line}").map_err(|e| TranslationError::Cache(e.to_string()))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Answers from a replay cache, falling back to `inner` on a miss and
/// recording the result. Without an inner client a miss is an error.
pub struct ReplayClient<C> {
    cache: ReplayCache,
    inner: Option<C>,
}

impl<C: TranslationClient> ReplayClient<C> {
    pub fn new(cache: ReplayCache, inner: Option<C>) -> Self {
        ReplayClient { cache, inner }
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }
}

impl<C: TranslationClient> TranslationClient for ReplayClient<C> {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslationError> {
        Ok(self.translate_batch(&[text.to_string()], source, target)?.remove(0))
    }

    fn translate_batch(&self, texts: &[String], source: &str, target: &str) -> Result<Vec<String>, TranslationError> {
        let mut out: Vec<Option<String>> = texts.iter().map(|t| self.cache.get(t, source, target)).collect();
        let misses: Vec<String> =
            texts.iter().zip(&out).filter(|(_, hit)| hit.is_none()).map(|(t, _)| t.clone()).collect();
        if !misses.is_empty() {
            let inner = self
                .inner
                .as_ref()
                .ok_or_else(|| TranslationError::NotFound { input: misses[0].clone(), target: target.to_string() })?;
            let translated = inner.translate_batch(&misses, source, target)?;
            let mut fresh = translated.into_iter();
            for (slot, text) in out.iter_mut().zip(texts) {
                if slot.is_none() {
                    let output =
                        fresh.next().ok_or_else(|| TranslationError::Service("short batch response".into()))?;
                    self.cache.record(ReplayRecord {
                        source: source.to_string(),
                        target_lang: target.to_string(),
                        input: text.clone(),
                        output: output.clone(),
                    })?;
                    *slot = Some(output);
                }
            }
        }
        Ok(out.into_iter().map(|o| o.expect("filled above")).collect())
    }
}

/// Client for a Cloud-Translation-v2-style JSON API: POST
/// `{q: [...], source, target, format: "text"}` with `key` as a query
/// parameter, answered by `{data: {translations: [{translatedText}]}}`.
pub struct RemoteClient {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
    batch_size: usize,
}

impl RemoteClient {
    /// Reads the credential from [`API_KEY_ENV`].
    pub fn from_env(url: impl Into<String>, batch_size: usize) -> Result<Self, TranslationError> {
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| TranslationError::MissingCredential(API_KEY_ENV))?;
        Self::new(url, api_key, batch_size)
    }

    pub fn new(url: impl Into<String>, api_key: String, batch_size: usize) -> Result<Self, TranslationError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| TranslationError::Service(e.to_string()))?;
        Ok(RemoteClient { client, url: url.into(), api_key, batch_size: batch_size.max(1) })
    }

    fn request(&self, texts: &[String], source: &str, target: &str) -> Result<Vec<String>, TranslationError> {
        let body = serde_json::json!({"q": texts, "source": source, "target": target, "format": "text"});
        let response = self
            .client
            .post(&self.url)
            .query(&[("key", &self.api_key)])
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| TranslationError::Service(e.without_url().to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| TranslationError::Service(e.without_url().to_string()))?;
        if !status.is_success() {
            return Err(TranslationError::Service(format!("status {status}")));
        }
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TranslationError::Service(e.to_string()))?;
        let items = doc
            .pointer("/data/translations")
            .and_then(|v| v.as_array())
            .ok_or_else(|| TranslationError::Service("missing data.translations".into()))?;
        let out: Vec<String> = items
            .iter()
            .map(|i| i.get("translatedText").and_then(|t| t.as_str()).map(str::to_string))
            .collect::<Option<_>>()
            .ok_or_else(|| TranslationError::Service("translation without translatedText".into()))?;
        if out.len() != texts.len() {
            return Err(TranslationError::Service(format!("asked for {} texts, got {}", texts.len(), out.len())));
        }
        Ok(out)
    }
}

impl TranslationClient for RemoteClient {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, TranslationError> {
        Ok(self.request(&[text.to_string()], source, target)?.remove(0))
    }

    fn translate_batch(&self, texts: &[String], source: &str, target: &str) -> Result<Vec<String>, TranslationError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.request(chunk, source, target)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TranslationField {
    /// `questionPatternModEntities`
    Pattern,
    /// `questionWithBrackets`
    Bracketed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum JobStatus {
    Done {
        output: String,
    },
    Failed {
        message: String,
    },
    /// Placeholder tokens changed during translation.
    PlaceholderLoss {
        output: String,
    },
    /// Bracket groups around entity labels changed during translation.
    BracketMismatch {
        output: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationJob {
    pub entry_id: u64,
    pub field: TranslationField,
    pub source_text: String,
    pub target: String,
    #[serde(flatten)]
    pub status: JobStatus,
}

impl TranslationJob {
    pub fn is_done(&self) -> bool {
        matches!(self.status, JobStatus::Done { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryTranslation {
    /// The entry with every successful job's output filled in.
    pub entry: DatasetEntry,
    pub jobs: Vec<TranslationJob>,
}

impl EntryTranslation {
    pub fn is_complete(&self) -> bool {
        self.jobs.iter().all(TranslationJob::is_done)
    }

    /// Some job hit a client error.
    pub fn is_partial(&self) -> bool {
        self.jobs.iter().any(|j| matches!(j.status, JobStatus::Failed { .. }))
    }

    /// Some job changed placeholders or brackets.
    pub fn is_flagged(&self) -> bool {
        self.jobs
            .iter()
            .any(|j| matches!(j.status, JobStatus::PlaceholderLoss { .. } | JobStatus::BracketMismatch { .. }))
    }
}

fn run_job(
    client: &impl TranslationClient,
    entry_id: u64,
    field: TranslationField,
    text: &str,
    source: &str,
    target: &str,
) -> TranslationJob {
    let status = match prepare_for_mt(text).and_then(|t| client.translate(&t, source, target)) {
        Err(e) => JobStatus::Failed { message: e.to_string() },
        Ok(raw) => {
            let output = postprocess_mt(&raw);
            match field {
                TranslationField::Pattern if placeholder_multiset(&output) != placeholder_multiset(text) => {
                    JobStatus::PlaceholderLoss { output }
                }
                TranslationField::Bracketed
                    if bracket_groups(&output).is_none() || bracket_groups(&output) != bracket_groups(text) =>
                {
                    JobStatus::BracketMismatch { output }
                }
                _ => JobStatus::Done { output },
            }
        }
    };
    TranslationJob { entry_id, field, source_text: text.to_string(), target: target.to_string(), status }
}

/// Translates the pattern and bracketed question of `entry` into every
/// target, independently. SPARQL fields are left alone.
pub fn translate_entry(
    entry: &DatasetEntry,
    client: &impl TranslationClient,
    source: &str,
    targets: &[String],
) -> EntryTranslation {
    let mut out = entry.clone();
    let mut jobs = Vec::new();
    let fields = [
        (TranslationField::Pattern, entry.question_pattern_mod_entities.get(source)),
        (TranslationField::Bracketed, entry.question_with_brackets.get(source)),
    ];
    for target in targets.iter().filter(|t| t.as_str() != source) {
        for (field, text) in fields {
            let job = match text {
                Some(text) => run_job(client, entry.id, field, text, source, target),
                None => TranslationJob {
                    entry_id: entry.id,
                    field,
                    source_text: String::new(),
                    target: target.clone(),
                    status: JobStatus::Failed { message: format!("no `{source}` text") },
                },
            };
            if let JobStatus::Done { output } = &job.status {
                let map: &mut BTreeMap<String, String> = match field {
                    TranslationField::Pattern => &mut out.question_pattern_mod_entities,
                    TranslationField::Bracketed => &mut out.question_with_brackets,
                };
                map.insert(target.clone(), output.clone());
            }
            jobs.push(job);
        }
    }
    EntryTranslation { entry: out, jobs }
}

/// [`translate_entry`] over many entries with at most `workers` in flight.
pub fn translate_entries(
    entries: &[DatasetEntry],
    client: &impl TranslationClient,
    source: &str,
    targets: &[String],
    workers: usize,
) -> Vec<EntryTranslation> {
    parallel_map(entries, workers, |e| translate_entry(e, client, source, targets))
}
