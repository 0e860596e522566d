use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetEntry, DatasetError, QuestionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SplitName {
    #[serde(rename = "MCD1")]
    Mcd1,
    #[serde(rename = "MCD2")]
    Mcd2,
    #[serde(rename = "MCD3")]
    Mcd3,
    Random,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [SplitName::Mcd1, SplitName::Mcd2, SplitName::Mcd3, SplitName::Random];

    pub fn is_mcd(self) -> bool {
        self != SplitName::Random
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Mcd1 => "MCD1",
            SplitName::Mcd2 => "MCD2",
            SplitName::Mcd3 => "MCD3",
            SplitName::Random => "Random",
        })
    }
}

impl FromStr for SplitName {
    type Err = DatasetError;

    /// Accepts the bare name in any case, or a file stem containing it
    /// (`mcd1.json`, `random_split`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let stem = lower.split('.').next().unwrap_or("");
        for name in SplitName::ALL {
            if stem.contains(&name.to_string().to_ascii_lowercase()) {
                return Ok(name);
            }
        }
        Err(DatasetError::UnknownSplit(s.to_string()))
    }
}

/// Split file contents: source ids per partition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceSplit {
    #[serde(default)]
    pub train_idxs: Vec<u64>,
    #[serde(default)]
    pub dev_idxs: Vec<u64>,
    #[serde(default)]
    pub test_idxs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub name: SplitName,
    pub train: BTreeSet<u64>,
    pub dev: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
}

impl SplitSet {
    pub fn partitions(&self) -> [(&'static str, &BTreeSet<u64>); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }

    /// Serializes back to the split-file layout.
    pub fn to_source(&self) -> SourceSplit {
        SourceSplit {
            train_idxs: self.train.iter().copied().collect(),
            dev_idxs: self.dev.iter().copied().collect(),
            test_idxs: self.test.iter().copied().collect(),
        }
    }
}

/// Ids dropped from each partition because their entry did not survive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitReport {
    pub name: SplitName,
    pub dropped_train: usize,
    pub dropped_dev: usize,
    pub dropped_test: usize,
}

/// Restricts each source split to the surviving ids.
pub fn induce_splits(
    surviving: &BTreeSet<u64>,
    sources: &[(SplitName, SourceSplit)],
) -> Result<(Vec<SplitSet>, Vec<SplitReport>), DatasetError> {
    let mut splits = Vec::with_capacity(sources.len());
    let mut reports = Vec::with_capacity(sources.len());
    for (name, source) in sources {
        let mut seen = BTreeSet::new();
        for &id in source.train_idxs.iter().chain(&source.dev_idxs).chain(&source.test_idxs) {
            if !seen.insert(id) {
                return Err(DatasetError::SplitCollision { split: name.to_string(), id });
            }
        }
        let keep = |ids: &[u64]| -> (BTreeSet<u64>, usize) {
            let kept: BTreeSet<u64> = ids.iter().copied().filter(|id| surviving.contains(id)).collect();
            let dropped = ids.len() - kept.len();
            (kept, dropped)
        };
        let (train, dropped_train) = keep(&source.train_idxs);
        let (dev, dropped_dev) = keep(&source.dev_idxs);
        let (test, dropped_test) = keep(&source.test_idxs);
        splits.push(SplitSet { name: *name, train, dev, test });
        reports.push(SplitReport { name: *name, dropped_train, dropped_dev, dropped_test });
    }
    Ok((splits, reports))
}

/// Entries per recursion depth, in depth order.
pub fn complexity_histogram<'a>(entries: impl IntoIterator<Item = &'a DatasetEntry>) -> BTreeMap<u32, usize> {
    let mut hist = BTreeMap::new();
    for e in entries {
        *hist.entry(e.recursion_depth).or_insert(0) += 1;
    }
    hist
}

/// Converts counts to percentages of their total.
pub fn normalize_histogram(hist: &BTreeMap<u32, usize>) -> BTreeMap<u32, f64> {
    let total: usize = hist.values().sum();
    hist.iter().map(|(&d, &c)| (d, if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })).collect()
}

/// Intersects the test partitions of `splits`, then keeps up to two yes/no
/// and two wh entries per recursion depth, drawn with `seed`. Output is in
/// depth order, yes/no before wh, ids ascending within each group.
pub fn build_intersection_testset(splits: &[&SplitSet], entries: &[DatasetEntry], seed: u64) -> Vec<DatasetEntry> {
    let Some((first, rest)) = splits.split_first() else {
        return Vec::new();
    };
    let common: BTreeSet<u64> =
        first.test.iter().copied().filter(|id| rest.iter().all(|s| s.test.contains(id))).collect();

    let by_id: BTreeMap<u64, &DatasetEntry> = entries.iter().rev().map(|e| (e.id, e)).collect();
    let mut groups: BTreeMap<(u32, QuestionKind), Vec<&DatasetEntry>> = BTreeMap::new();
    for id in &common {
        if let Some(e) = by_id.get(id) {
            groups.entry((e.recursion_depth, e.question_kind)).or_default().push(e);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for group in groups.values() {
        let mut picked: Vec<&DatasetEntry> = group.choose_multiple(&mut rng, 2).copied().collect();
        picked.sort_by_key(|e| e.id);
        out.extend(picked.into_iter().cloned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::QueryResult;

    fn entry(id: u64, depth: u32, kind: QuestionKind) -> DatasetEntry {
        DatasetEntry {
            id,
            question_with_brackets: Default::default(),
            question_pattern_mod_entities: Default::default(),
            sparql: String::new(),
            sparql_pattern_mod_entities: String::new(),
            recursion_depth: depth,
            expected_response: QueryResult::Boolean(true),
            question_kind: kind,
            negative_of: None,
        }
    }

    #[test]
    fn induce_restricts_to_survivors() {
        let src = SourceSplit { train_idxs: vec![1, 2], dev_idxs: vec![], test_idxs: vec![3] };
        let (splits, reports) = induce_splits(&[1, 3].into(), &[(SplitName::Mcd1, src.clone())]).unwrap();
        assert_eq!(splits[0].train, [1].into());
        assert_eq!(splits[0].test, [3].into());
        assert_eq!(reports[0].dropped_train, 1);
        let (all, _) = induce_splits(&[1, 2, 3].into(), &[(SplitName::Random, src.clone())]).unwrap();
        assert_eq!(all[0].to_source(), src);
    }

    #[test]
    fn induce_rejects_collision() {
        let src = SourceSplit { train_idxs: vec![1], dev_idxs: vec![1], test_idxs: vec![] };
        assert_eq!(
            induce_splits(&[1].into(), &[(SplitName::Mcd2, src)]).unwrap_err(),
            DatasetError::SplitCollision { split: "MCD2".into(), id: 1 }
        );
    }

    #[test]
    fn histogram_examples() {
        assert!(complexity_histogram(&[]).is_empty());
        let es = [entry(0, 20, QuestionKind::Wh), entry(1, 20, QuestionKind::Wh), entry(2, 21, QuestionKind::Wh)];
        let h = complexity_histogram(&es);
        assert_eq!(h, [(20, 2), (21, 1)].into());
        let pct = normalize_histogram(&h);
        assert!((pct[&20] - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn split_names_from_file_stems() {
        assert_eq!("mcd1.json".parse::<SplitName>().unwrap(), SplitName::Mcd1);
        assert_eq!("Random".parse::<SplitName>().unwrap(), SplitName::Random);
        assert!("other.json".parse::<SplitName>().is_err());
    }

    #[test]
    fn intersection_takes_available_entries() {
        let split = |test: &[u64]| SplitSet {
            name: SplitName::Mcd1,
            train: [].into(),
            dev: [].into(),
            test: test.iter().copied().collect(),
        };
        let es = [entry(1, 5, QuestionKind::YesNo), entry(2, 6, QuestionKind::Wh)];
        let (a, b, c) = (split(&[1, 2]), split(&[1, 2]), split(&[1]));
        let out = build_intersection_testset(&[&a, &b, &c], &es, 0);
        assert_eq!(out.iter().map(|e| e.id).collect::<Vec<_>>(), vec![1]);
        let d = split(&[2]);
        assert!(build_intersection_testset(&[&a, &c, &d], &es, 0).is_empty());
    }
}
