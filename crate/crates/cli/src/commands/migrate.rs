use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;

use kbqa_core::dataset::{read_jsonl_indexed, MigratedEntry, QuestionKind, SourceEntry};
use kbqa_core::mapping::{load_mapping, migrate_query, migration_report, MigrationOutcome, Rejection, RejectionReason};
use kbqa_core::sparql::{parse_query, Dialect};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let input = config.single_input()?;
    let mapping = config.require::<std::path::Path>(&config.mapping, "mapping")?;
    let (table, specials) =
        load_mapping(mapping, config.specials.as_deref()).map_err(|e| CliError::Config(e.to_string()))?;
    let file = File::open(input).map_err(|e| CliError::io(input, e))?;
    let sources: Vec<(u64, SourceEntry)> = read_jsonl_indexed(BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", input.display())))?;

    let mut out = OutputDir::open(&config.output)?;
    let mut outcomes = Vec::with_capacity(sources.len());
    let mut migrated = Vec::new();
    let mut rejections = String::from("id\treason\tproperty\tdetail\n");
    for (line, source) in &sources {
        let id = source.id.unwrap_or(*line);
        let depth = source
            .depth()
            .ok_or_else(|| CliError::Validation(format!("{}: entry {id} has no recursion depth", input.display())))?;
        let outcome = match parse_query(&source.sparql_pattern_mod_entities, Dialect::Freebase) {
            Ok(q) => migrate_query(&q, &table, &specials),
            Err(e) => MigrationOutcome::Rejected(Rejection {
                reason: RejectionReason::UnsupportedForm,
                property: None,
                detail: format!("does not parse: {e}"),
            }),
        };
        match &outcome {
            MigrationOutcome::Migrated(q) => migrated.push(MigratedEntry {
                id,
                question_pattern_mod_entities: source.question_pattern_mod_entities.clone(),
                sparql_pattern_mod_entities: q.to_string(),
                recursion_depth: depth,
                question_kind: QuestionKind::of_form(&q.form),
            }),
            MigrationOutcome::Rejected(r) => {
                log::debug!("entry {id} rejected: {r}");
                let _ = writeln!(
                    rejections,
                    "{id}\t{}\t{}\t{}",
                    r.reason.kind(),
                    r.property.as_deref().unwrap_or(""),
                    r.detail.replace(['\t', '\n'], " ")
                );
            }
        }
        outcomes.push(outcome);
    }
    let report = migration_report(&outcomes);
    log::info!("migrated {} of {} entries ({:.4})", report.migrated, report.total, report.survival_ratio);

    out.write_jsonl("migrated.jsonl", &migrated)?;
    out.write_json("migration_report.json", &report)?;
    out.write("migration_rejections.tsv", rejections.as_bytes())?;
    let mut inputs = vec![input, mapping];
    inputs.extend(config.specials.as_deref());
    out.finish(config, &inputs)
}
