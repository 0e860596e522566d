use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use kbqa_core::dataset::{DatasetEntry, MigratedEntry, QuestionKind};
use kbqa_core::grounding::{
    entry_rng, ground_entry, negative_sample, EndpointConfig, GroundError, GroundOptions, GroundOutcome, HttpEndpoint,
    NegativeOutcome, PredicatePools, QueryService, TripleStoreSnapshot,
};
use kbqa_core::mapping::SpecialEntityMap;
use kbqa_core::par::parallel_map;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{file_digest, read_jsonl, sha256_hex, OutputDir};

pub const CHECKPOINT: &str = "ground.checkpoint.jsonl";
const CHUNK: usize = 64;

/// One processed entry, as stored in the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
enum Record {
    Grounded { id: u64, entries: Vec<DatasetEntry> },
    NoAssignment { id: u64, probe: String },
    Unrealizable { id: u64, probe: String, reason: String },
    Invalid { id: u64, message: String },
}

impl Record {
    fn id(&self) -> u64 {
        match self {
            Record::Grounded { id, .. }
            | Record::NoAssignment { id, .. }
            | Record::Unrealizable { id, .. }
            | Record::Invalid { id, .. } => *id,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
struct CheckpointHeader {
    run_key: String,
}

#[derive(Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
struct GroundReport {
    input: usize,
    resumed: usize,
    grounded: usize,
    no_assignment: usize,
    unrealizable: usize,
    invalid: usize,
    negatives: usize,
    exhausted: usize,
    written: usize,
}

fn open_service(config: &RunConfig) -> Result<Box<dyn QueryService>, CliError> {
    match (&config.endpoint, &config.snapshot) {
        (Some(url), None) => {
            let mut endpoint = EndpointConfig::new(url.clone());
            endpoint.requests_per_second = config.rps;
            endpoint.max_inflight = config.max_inflight;
            Ok(Box::new(HttpEndpoint::new(endpoint)?))
        }
        (None, Some(path)) => {
            let snapshot = TripleStoreSnapshot::load(path, config.labels.as_deref()).map_err(CliError::Config)?;
            log::info!("loaded snapshot with {} triples", snapshot.len());
            Ok(Box::new(snapshot))
        }
        _ => Err(CliError::Config("`ground` needs exactly one of --endpoint or --snapshot".into())),
    }
}

fn load_specials(config: &RunConfig) -> Result<SpecialEntityMap, CliError> {
    match &config.specials {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            SpecialEntityMap::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(SpecialEntityMap::new()),
    }
}

/// Identifies the inputs and settings a checkpoint belongs to.
fn run_key(config: &RunConfig, input: &Path) -> Result<String, CliError> {
    let key = serde_json::json!({
        "input": file_digest(input)?,
        "endpoint": config.endpoint,
        "snapshot": config.snapshot.as_deref().map(file_digest).transpose()?,
        "labels": config.labels.as_deref().map(file_digest).transpose()?,
        "specials": config.specials.as_deref().map(file_digest).transpose()?,
        "language": config.language(),
        "deterministic": config.deterministic,
    });
    Ok(sha256_hex(key.to_string().as_bytes()))
}

/// Reads finished records, or starts a fresh checkpoint.
fn load_checkpoint(path: &Path, key: &str) -> Result<BTreeMap<u64, Record>, CliError> {
    let header = CheckpointHeader { run_key: key.to_string() };
    let Ok(file) = File::open(path) else {
        let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
        writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes"))
            .map_err(|e| CliError::io(path, e))?;
        return Ok(BTreeMap::new());
    };
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().transpose().map_err(|e| CliError::io(path, e))?.unwrap_or_default();
    if serde_json::from_str::<CheckpointHeader>(&first).ok().as_ref() != Some(&header) {
        return Err(CliError::Config(format!(
            "{} belongs to a different run; delete it to start over",
            path.display()
        )));
    }
    let mut done = BTreeMap::new();
    for line in lines {
        let line = line.map_err(|e| CliError::io(path, e))?;
        // A torn final line from an interrupted write is dropped.
        if let Ok(record) = serde_json::from_str::<Record>(&line) {
            done.insert(record.id(), record);
        }
    }
    Ok(done)
}

fn process(entry: &MigratedEntry, service: &dyn QueryService, opts: &GroundOptions) -> Result<Record, CliError> {
    let id = entry.id;
    match ground_entry(entry, &service, opts) {
        Ok(GroundOutcome::Grounded(found)) => {
            Ok(Record::Grounded { id, entries: found.into_iter().map(|g| g.entry).collect() })
        }
        Ok(GroundOutcome::NoAssignment { probe }) => Ok(Record::NoAssignment { id, probe }),
        Ok(GroundOutcome::Unrealizable { probe, reason }) => Ok(Record::Unrealizable { id, probe, reason }),
        Err(GroundError::Endpoint(e)) => Err(e.into()),
        Err(e) => Ok(Record::Invalid { id, message: e.to_string() }),
    }
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let input = config.single_input()?;
    let entries: Vec<MigratedEntry> = read_jsonl(input)?;
    let mut ids = BTreeSet::new();
    for e in &entries {
        if !ids.insert(e.id) {
            return Err(CliError::Validation(format!("{}: duplicate id {}", input.display(), e.id)));
        }
    }
    let specials = load_specials(config)?;
    let service = open_service(config)?;
    let service: &dyn QueryService = service.as_ref();
    let opts = GroundOptions {
        deterministic: config.deterministic,
        language: config.language().to_string(),
        bindings_per_entry: 1,
        excluded: specials.qcodes().collect(),
    };

    let mut out = OutputDir::open(&config.output)?;
    let checkpoint = out.path(CHECKPOINT);
    let mut done = load_checkpoint(&checkpoint, &run_key(config, input)?)?;
    let mut report = GroundReport { input: entries.len(), resumed: done.len(), ..GroundReport::default() };
    if report.resumed > 0 {
        log::info!("resuming: {} of {} entries already processed", report.resumed, entries.len());
    }

    let pending: Vec<&MigratedEntry> = entries.iter().filter(|e| !done.contains_key(&e.id)).collect();
    let mut log_file = OpenOptions::new().append(true).open(&checkpoint).map_err(|e| CliError::io(&checkpoint, e))?;
    for (n, chunk) in pending.chunks(CHUNK).enumerate() {
        let results = parallel_map(chunk, config.max_inflight, |e| process(e, service, &opts));
        let mut failure = None;
        for result in results {
            match result {
                Ok(record) => {
                    let line = serde_json::to_string(&record).expect("record serializes");
                    writeln!(log_file, "{line}").map_err(|e| CliError::io(&checkpoint, e))?;
                    done.insert(record.id(), record);
                }
                Err(e) => failure = failure.or(Some(e)),
            }
        }
        log_file.flush().map_err(|e| CliError::io(&checkpoint, e))?;
        if let Some(e) = failure {
            log::error!("stopping; rerun the same command to resume from {}", checkpoint.display());
            return Err(e);
        }
        log::info!("grounded {} of {} pending entries", ((n + 1) * CHUNK).min(pending.len()), pending.len());
    }

    let mut positives = Vec::new();
    let mut failures = String::from("id\toutcome\tprobe\treason\n");
    for record in done.values() {
        match record {
            Record::Grounded { entries, .. } => {
                report.grounded += 1;
                for e in entries {
                    e.validate(|q| specials.is_special(q)).map_err(|err| CliError::Validation(err.to_string()))?;
                }
                positives.extend(entries.iter().cloned());
            }
            Record::NoAssignment { id, probe } => {
                report.no_assignment += 1;
                let _ = writeln!(failures, "{id}\tnoAssignment\t{probe}\t");
            }
            Record::Unrealizable { id, probe, reason } => {
                report.unrealizable += 1;
                let _ = writeln!(failures, "{id}\tunrealizable\t{probe}\t{reason}");
            }
            Record::Invalid { id, message } => {
                report.invalid += 1;
                let _ = writeln!(failures, "{id}\tinvalid\t\t{}", message.replace(['\t', '\n'], " "));
            }
        }
    }

    let mut dataset = positives.clone();
    if config.negatives {
        let pools = PredicatePools::from_entries(&positives);
        let yes_no: Vec<&DatasetEntry> = positives
            .iter()
            .filter(|e| e.question_kind == QuestionKind::YesNo && e.expected_response.is_satisfied())
            .collect();
        let outcomes = parallel_map(&yes_no, config.max_inflight, |e| {
            negative_sample(e, &pools, &service, config.max_attempts, &mut entry_rng(config.seed, e.id))
        });
        let mut next_id = entries.iter().map(|e| e.id).max().map_or(0, |m| m + 1);
        for outcome in outcomes {
            match outcome? {
                NegativeOutcome::Negative(mut negative) => {
                    negative.id = next_id;
                    next_id += 1;
                    report.negatives += 1;
                    dataset.push(negative);
                }
                NegativeOutcome::Exhausted { .. } => report.exhausted += 1,
            }
        }
    }
    report.written = dataset.len();
    log::info!(
        "grounded {}, no assignment {}, unrealizable {}, negatives {}",
        report.grounded,
        report.no_assignment,
        report.unrealizable,
        report.negatives
    );

    out.write_jsonl("dataset.jsonl", &dataset)?;
    out.write_json("ground_report.json", &report)?;
    out.write("ground_failures.tsv", failures.as_bytes())?;
    drop(log_file);
    fs::remove_file(&checkpoint).map_err(|e| CliError::io(&checkpoint, e))?;
    let mut inputs: Vec<&Path> = vec![input];
    inputs.extend(config.snapshot.as_deref());
    inputs.extend(config.labels.as_deref());
    inputs.extend(config.specials.as_deref());
    out.finish(config, &inputs)
}
