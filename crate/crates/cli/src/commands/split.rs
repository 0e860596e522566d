use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kbqa_core::dataset::{build_intersection_testset, induce_splits, DatasetEntry, SourceSplit, SplitName, SplitSet};

use crate::commands::stats::histogram_tsv;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_jsonl, OutputDir};

/// `*.json` files in `dir` whose stem names a split, in split order.
fn source_splits(dir: &Path) -> Result<Vec<(SplitName, SourceSplit, PathBuf)>, CliError> {
    let listing = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut found = BTreeMap::new();
    for item in listing {
        let path = item.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let Ok(name) = stem.parse::<SplitName>() else {
            log::warn!("ignoring {}: not a split name", path.display());
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let split: SourceSplit =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if found.insert(name, (split, path.clone())).is_some() {
            return Err(CliError::Config(format!("two files in {} name split {name}", dir.display())));
        }
    }
    if found.is_empty() {
        return Err(CliError::Config(format!("no split files in {}", dir.display())));
    }
    Ok(found.into_iter().map(|(n, (s, p))| (n, s, p)).collect())
}

/// Places each negative entry in the partition holding its positive.
fn add_negatives(split: &mut SplitSet, entries: &[DatasetEntry]) {
    for e in entries {
        let Some(of) = e.negative_of else { continue };
        for part in [&mut split.train, &mut split.dev, &mut split.test] {
            if part.contains(&of) {
                part.insert(e.id);
            }
        }
    }
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let input = config.single_input()?;
    let dir = config.require::<Path>(&config.splits, "splits")?;
    let entries: Vec<DatasetEntry> = read_jsonl(input)?;
    let sources = source_splits(dir)?;
    let surviving: BTreeSet<u64> = entries.iter().filter(|e| e.negative_of.is_none()).map(|e| e.id).collect();
    let named: Vec<(SplitName, SourceSplit)> = sources.iter().map(|(n, s, _)| (*n, s.clone())).collect();
    let (mut splits, reports) = induce_splits(&surviving, &named)?;
    for split in &mut splits {
        add_negatives(split, &entries);
    }

    let mut out = OutputDir::open(&config.output)?;
    let by_id: BTreeMap<u64, &DatasetEntry> = entries.iter().map(|e| (e.id, e)).collect();
    let mut table = String::from("split\ttrain\tdev\ttest\tdroppedTrain\tdroppedDev\tdroppedTest\n");
    let mut histograms = String::from("split\tpartition\tdepth\tcount\tpercent\n");
    for (split, report) in splits.iter().zip(&reports) {
        out.write_json(&format!("{}.json", split.name.to_string().to_lowercase()), &split.to_source())?;
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            split.name,
            split.train.len(),
            split.dev.len(),
            split.test.len(),
            report.dropped_train,
            report.dropped_dev,
            report.dropped_test
        );
        for (partition, ids) in split.partitions() {
            let tsv = histogram_tsv(ids.iter().filter_map(|id| by_id.get(id).copied()));
            for row in tsv.lines().skip(1) {
                let _ = writeln!(histograms, "{}\t{partition}\t{row}", split.name);
            }
        }
    }
    out.write("split_report.tsv", table.as_bytes())?;
    out.write("split_histograms.tsv", histograms.as_bytes())?;

    let mcd: Vec<&SplitSet> = splits.iter().filter(|s| s.name.is_mcd()).collect();
    if mcd.len() == 3 {
        let sample = build_intersection_testset(&mcd, &entries, config.seed);
        log::info!("intersection test set: {} entries", sample.len());
        out.write_jsonl("intersection_test.jsonl", &sample)?;
    }
    let mut inputs: Vec<&Path> = vec![input];
    inputs.extend(sources.iter().map(|(_, _, p)| p.as_path()));
    out.finish(config, &inputs)
}
