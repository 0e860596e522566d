use std::path::Path;

use kbqa_core::dataset::DatasetEntry;
use kbqa_core::translation::{translate_entries, RemoteClient, ReplayCache, ReplayClient, TranslationJob};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_jsonl, OutputDir};

const BATCH_SIZE: usize = 64;

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct TranslationReport {
    source: String,
    targets: Vec<String>,
    entries: usize,
    complete: usize,
    /// A client call failed for some field.
    partial: Vec<u64>,
    /// Placeholders or brackets changed in translation.
    flagged: Vec<u64>,
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let input = config.single_input()?;
    let (source, targets) = config.languages.split_first().expect("at least one language");
    if targets.is_empty() {
        return Err(CliError::Config("`translate` needs --languages SOURCE,TARGET[,...]".into()));
    }
    if config.replay.is_none() && config.translate_url.is_none() {
        return Err(CliError::Config("`translate` needs --replay, --translate-url, or both".into()));
    }
    let entries: Vec<DatasetEntry> = read_jsonl(input)?;
    let cache = match &config.replay {
        Some(path) => ReplayCache::open(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => ReplayCache::in_memory(),
    };
    let remote = config
        .translate_url
        .as_ref()
        .map(|url| RemoteClient::from_env(url.clone(), BATCH_SIZE))
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let client = ReplayClient::new(cache, remote);

    let mut out = OutputDir::open(&config.output)?;
    let results = translate_entries(&entries, &client, source, targets, config.max_inflight);
    let mut report = TranslationReport {
        source: source.clone(),
        targets: targets.to_vec(),
        entries: entries.len(),
        complete: 0,
        partial: Vec::new(),
        flagged: Vec::new(),
    };
    let mut translated = Vec::new();
    let mut jobs: Vec<&TranslationJob> = Vec::new();
    for r in &results {
        jobs.extend(&r.jobs);
        if r.is_partial() {
            report.partial.push(r.entry.id);
        }
        if r.is_flagged() {
            report.flagged.push(r.entry.id);
        }
        if r.is_complete() {
            translated.push(r.entry.clone());
        }
    }
    report.complete = translated.len();
    log::info!(
        "translated {} of {} entries; {} partial, {} flagged",
        report.complete,
        report.entries,
        report.partial.len(),
        report.flagged.len()
    );

    out.write_jsonl("dataset.jsonl", &translated)?;
    out.write_jsonl("translation_jobs.jsonl", jobs)?;
    out.write_json("translation_report.json", &report)?;
    let mut inputs: Vec<&Path> = vec![input];
    inputs.extend(config.replay.as_deref());
    out.finish(config, &inputs)
}
