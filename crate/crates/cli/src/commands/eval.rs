use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use kbqa_core::dataset::DatasetEntry;
use kbqa_core::eval::{
    corpus_bleu, error_report, evaluate, BleuScore, ErrorCategory, EvalOptions, MatchMode, PredictionRecord, Smoothing,
    Tokenizer,
};
use kbqa_core::mapping::SpecialEntityMap;
use serde::Serialize;

use crate::config::{RunConfig, SmoothingArg, TokenizerArg};
use crate::error::CliError;
use crate::output::{read_jsonl, OutputDir};

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct RunSummary {
    input: String,
    scored: usize,
    uncovered: usize,
    /// Percent.
    exact_match: f64,
    bleu: Option<BleuScore>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct EvalSummary<'a> {
    split: &'a str,
    language: &'a str,
    match_mode: MatchMode,
    strict_coverage: bool,
    tokenizer: &'static str,
    runs: Vec<RunSummary>,
    errors: kbqa_core::eval::ErrorReport,
}

fn smoothing(config: &RunConfig) -> Smoothing {
    match config.smoothing {
        SmoothingArg::None => Smoothing::None,
        SmoothingArg::Exp => Smoothing::Exp,
    }
}

fn tokenizer(config: &RunConfig) -> Tokenizer {
    match config.tokenizer {
        TokenizerArg::Whitespace => Tokenizer::Whitespace,
        TokenizerArg::Char => Tokenizer::Char,
    }
}

fn tag(config: &RunConfig) -> String {
    format!("{}_{}", config.split_name.as_deref().unwrap_or("all"), config.language())
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    if config.input.is_empty() {
        return Err(CliError::Config("`eval` needs at least one --input".into()));
    }
    let gold_path = config.require::<Path>(&config.gold, "gold")?;
    let gold: Vec<DatasetEntry> = read_jsonl(gold_path)?;
    let mut out = OutputDir::open(&config.output)?;
    if config.questions {
        score_questions(config, &gold, &mut out)?;
    } else {
        score_queries(config, &gold, &mut out)?;
    }
    let mut inputs: Vec<&Path> = config.input.iter().map(|p| p.as_path()).collect();
    inputs.push(gold_path);
    inputs.extend(config.specials.as_deref());
    out.finish(config, &inputs)
}

fn score_queries(config: &RunConfig, gold: &[DatasetEntry], out: &mut OutputDir) -> Result<(), CliError> {
    let specials = match (&config.specials, config.exclude_specials) {
        (Some(path), true) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            SpecialEntityMap::parse(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        (None, true) => return Err(CliError::Config("--exclude-specials needs --specials".into())),
        _ => SpecialEntityMap::new(),
    };
    let opts = EvalOptions {
        mode: if config.normalized { MatchMode::Normalized } else { MatchMode::Strict },
        strict_coverage: config.strict_coverage,
        smoothing: smoothing(config),
        workers: config.max_inflight,
        ..EvalOptions::default()
    };
    let tag = tag(config);
    let mut runs = Vec::new();
    let mut profiles = Vec::new();
    let mut depth_rows = String::from("run\tdepth\tcorrect\ttotal\taccuracy\n");
    for (k, path) in config.input.iter().enumerate() {
        let predictions: Vec<PredictionRecord> = read_jsonl(path)?;
        let evaluation = evaluate(gold, &predictions, &opts, |e| specials.is_special(e))?;
        for (depth, t) in &evaluation.by_depth {
            let _ = writeln!(depth_rows, "{k}\t{depth}\t{}\t{}\t{:.4}", t.correct, t.total, 100.0 * t.accuracy());
        }
        profiles.push(
            evaluation.pairs.iter().filter(|p| !p.outcome.is_correct()).map(|p| p.profile.clone()).collect::<Vec<_>>(),
        );
        out.write_jsonl(&format!("scored_{tag}_run{k}.jsonl"), &evaluation.pairs)?;
        log::info!("{}: exact match {:.2}%", path.display(), 100.0 * evaluation.exact_match);
        runs.push(RunSummary {
            input: path.display().to_string(),
            scored: evaluation.pairs.len(),
            uncovered: evaluation.uncovered.len(),
            exact_match: 100.0 * evaluation.exact_match,
            bleu: evaluation.bleu,
        });
    }
    let errors = error_report(&profiles);
    let mut categories = String::from("category\ttotal\tmean\n");
    for c in ErrorCategory::ALL {
        let _ = writeln!(categories, "{c}\t{}\t{}", errors.totals[&c], errors.means[&c]);
    }
    let _ = writeln!(categories, "MultipleErrors\t{}\t{}", errors.multiple_errors, errors.mean_multiple_errors);
    let _ = writeln!(categories, "Unparseable\t{}\t{}", errors.unparseable, errors.mean_unparseable);
    let structural_mean = errors.structural_only as f64 / errors.runs.max(1) as f64;
    let _ = writeln!(categories, "StructuralOnly\t{}\t{structural_mean}", errors.structural_only);

    out.write(&format!("accuracy_by_depth_{tag}.tsv"), depth_rows.as_bytes())?;
    out.write(&format!("error_categories_{tag}.tsv"), categories.as_bytes())?;
    let summary = EvalSummary {
        split: config.split_name.as_deref().unwrap_or("all"),
        language: config.language(),
        match_mode: opts.mode,
        strict_coverage: opts.strict_coverage,
        tokenizer: Tokenizer::Whitespace.name(),
        runs,
        errors,
    };
    out.write_json(&format!("eval_{tag}.json"), &summary)
}

/// BLEU of each input's question patterns against the gold entries with the
/// same id, per language.
fn score_questions(config: &RunConfig, gold: &[DatasetEntry], out: &mut OutputDir) -> Result<(), CliError> {
    let tokenizer = tokenizer(config);
    let by_id: BTreeMap<u64, &DatasetEntry> = gold.iter().map(|e| (e.id, e)).collect();
    let mut table = format!("# tokenizer: {}\nrun\tlanguage\tpairs\tbleu\n", tokenizer.name());
    let mut summary = Vec::new();
    for (k, path) in config.input.iter().enumerate() {
        let hyps: Vec<DatasetEntry> = read_jsonl(path)?;
        for lang in &config.languages {
            let (mut refs, mut preds) = (Vec::new(), Vec::new());
            for h in &hyps {
                let reference = by_id.get(&h.id).and_then(|g| g.question_pattern_mod_entities.get(lang));
                if let (Some(r), Some(p)) = (reference, h.question_pattern_mod_entities.get(lang)) {
                    refs.push(r.clone());
                    preds.push(p.clone());
                }
            }
            let score = corpus_bleu(&refs, &preds, tokenizer, smoothing(config)).ok();
            let shown = score.as_ref().map_or("NA".to_string(), |s| format!("{:.4}", s.score));
            let _ = writeln!(table, "{k}\t{lang}\t{}\t{shown}", refs.len());
            summary.push(serde_json::json!({"run": k, "language": lang, "pairs": refs.len(), "bleu": score}));
        }
    }
    let tag = tag(config);
    out.write(&format!("question_bleu_{tag}.tsv"), table.as_bytes())?;
    out.write_json(
        &format!("question_bleu_{tag}.json"),
        &serde_json::json!({"tokenizer": tokenizer.name(), "results": summary}),
    )
}
