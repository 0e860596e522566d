use std::collections::BTreeMap;
use std::fmt::Write as _;

use kbqa_core::dataset::{complexity_histogram, compute_stats, normalize_histogram, DatasetEntry, DatasetStats};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_jsonl, OutputDir};

/// `depth<TAB>count<TAB>percent` rows for a histogram.
pub fn histogram_tsv<'a>(entries: impl IntoIterator<Item = &'a DatasetEntry>) -> String {
    let hist = complexity_histogram(entries);
    let pct = normalize_histogram(&hist);
    let mut out = String::from("depth\tcount\tpercent\n");
    for (depth, count) in &hist {
        let _ = writeln!(out, "{depth}\t{count}\t{:.2}", pct[depth]);
    }
    out
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let input = config.single_input()?;
    let entries: Vec<DatasetEntry> = read_jsonl(input)?;
    let mut out = OutputDir::open(&config.output)?;
    let mut summary: BTreeMap<&str, DatasetStats> = BTreeMap::new();
    for lang in &config.languages {
        let stats = compute_stats(&entries, lang);
        out.write(&format!("stats_{lang}.tsv"), stats.to_tsv().as_bytes())?;
        summary.insert(lang, stats);
    }
    out.write_json("stats.json", &summary)?;
    out.write("complexity_histogram.tsv", histogram_tsv(&entries).as_bytes())?;
    out.finish(config, &[input])
}
