//! Dataset records, corpus statistics, split induction and complexity
//! histograms.

mod entry;
mod splits;
mod stats;

use thiserror::Error;

pub use entry::{
    read_jsonl, read_jsonl_indexed, write_jsonl, ComplexityMeasures, DatasetEntry, MigratedEntry, QuestionKind,
    SourceEntry,
};
pub use splits::{
    build_intersection_testset, complexity_histogram, induce_splits, normalize_histogram, SourceSplit, SplitName,
    SplitReport, SplitSet,
};
pub use stats::{compute_stats, DatasetStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("entry {id}: {message}")]
    InvalidEntry { id: u64, message: String },
    #[error("split {split}: id {id} appears in more than one partition")]
    SplitCollision { split: String, id: u64 },
    #[error("unknown split name `{0}`")]
    UnknownSplit(String),
}
