//! Command-line flags, the optional key-value config file, and the merged
//! run configuration recorded in every manifest.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kbqa", version, about = "Migrate, ground, translate and score KBQA datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Rewrite Freebase-schema query patterns into the Wikidata schema.
    Migrate,
    /// Bind placeholders to entities and realize questions.
    Ground,
    /// Translate question fields into further languages.
    Translate,
    /// Corpus statistics and complexity histograms.
    Stats,
    /// Restrict source splits to surviving entries.
    Split,
    /// Score predictions against gold entries.
    Eval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Migrate => "migrate",
            Command::Ground => "ground",
            Command::Translate => "translate",
            Command::Stats => "stats",
            Command::Split => "split",
            Command::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerArg {
    Whitespace,
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingArg {
    None,
    Exp,
}

/// Flags shared by all subcommands. Anything left unset falls back to the
/// config file, then to a default.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Input file (repeat for several prediction files in `eval`).
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Property mapping table (TSV).
    #[arg(long, global = true)]
    pub mapping: Option<PathBuf>,
    /// Special-entity table (TSV).
    #[arg(long, global = true)]
    pub specials: Option<PathBuf>,
    /// SPARQL endpoint URL.
    #[arg(long, global = true, conflicts_with = "snapshot")]
    pub endpoint: Option<String>,
    /// Local fact file used instead of an endpoint.
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,
    /// Label file for the snapshot.
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Comma-separated language codes; the first is the grounding and
    /// statistics language.
    #[arg(long, global = true, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Endpoint requests per second.
    #[arg(long, global = true)]
    pub rps: Option<f64>,
    /// Concurrent requests (and worker threads).
    #[arg(long, global = true)]
    pub max_inflight: Option<usize>,
    /// Order grounding probes so that results are reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Count gold entries without a prediction as wrong.
    #[arg(long, global = true)]
    pub strict_coverage: bool,
    /// Compare queries with triples and filters sorted.
    #[arg(long, global = true)]
    pub normalized: bool,
    /// Add negative yes/no entries after grounding.
    #[arg(long, global = true)]
    pub negatives: bool,
    /// Key-value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Gold dataset for `eval`.
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    /// Directory of source split files for `split`.
    #[arg(long, global = true)]
    pub splits: Option<PathBuf>,
    /// Translation replay cache.
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,
    /// Remote translation service URL; the key comes from the environment.
    #[arg(long, global = true)]
    pub translate_url: Option<String>,
    /// Split name used in `eval` report file names.
    #[arg(long, global = true)]
    pub split_name: Option<String>,
    /// Swap attempts per entry during negative sampling.
    #[arg(long, global = true)]
    pub max_attempts: Option<usize>,
    /// Leave special entities out of the error taxonomy.
    #[arg(long, global = true)]
    pub exclude_specials: bool,
    /// Score question text of `--input` against `--gold` instead of queries.
    #[arg(long, global = true)]
    pub questions: bool,
    #[arg(long, global = true, value_enum)]
    pub tokenizer: Option<TokenizerArg>,
    #[arg(long, global = true, value_enum)]
    pub smoothing: Option<SmoothingArg>,
}

/// Same keys as the flags, in `key = value` form.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub input: Option<Vec<PathBuf>>,
    pub output: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub specials: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub snapshot: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub languages: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub rps: Option<f64>,
    pub max_inflight: Option<usize>,
    pub deterministic: Option<bool>,
    pub strict_coverage: Option<bool>,
    pub normalized: Option<bool>,
    pub negatives: Option<bool>,
    pub gold: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub translate_url: Option<String>,
    pub split_name: Option<String>,
    pub max_attempts: Option<usize>,
    pub exclude_specials: Option<bool>,
    pub questions: Option<bool>,
    pub tokenizer: Option<TokenizerArg>,
    pub smoothing: Option<SmoothingArg>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Effective settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub command: Command,
    pub input: Vec<PathBuf>,
    pub output: PathBuf,
    pub mapping: Option<PathBuf>,
    pub specials: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub snapshot: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub languages: Vec<String>,
    pub seed: u64,
    pub rps: f64,
    pub max_inflight: usize,
    pub deterministic: bool,
    pub strict_coverage: bool,
    pub normalized: bool,
    pub negatives: bool,
    pub gold: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub translate_url: Option<String>,
    pub split_name: Option<String>,
    pub max_attempts: usize,
    pub exclude_specials: bool,
    pub questions: bool,
    pub tokenizer: TokenizerArg,
    pub smoothing: SmoothingArg,
}

impl RunConfig {
    /// Merges flags over the config file over defaults.
    pub fn resolve(command: Command, flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let nonempty = |v: Vec<String>| (!v.is_empty()).then_some(v);
        let config = RunConfig {
            command,
            input: if flags.input.is_empty() { file.input.unwrap_or_default() } else { flags.input },
            output: flags
                .output
                .or(file.output)
                .ok_or_else(|| CliError::Config("an output directory is required (--output)".into()))?,
            mapping: flags.mapping.or(file.mapping),
            specials: flags.specials.or(file.specials),
            endpoint: flags.endpoint.or(file.endpoint),
            snapshot: flags.snapshot.or(file.snapshot),
            labels: flags.labels.or(file.labels),
            languages: nonempty(flags.languages).or(file.languages).unwrap_or_else(|| vec!["en".into()]),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            rps: flags.rps.or(file.rps).unwrap_or(5.0),
            max_inflight: flags.max_inflight.or(file.max_inflight).unwrap_or(4).max(1),
            deterministic: flags.deterministic || file.deterministic.unwrap_or(false),
            strict_coverage: flags.strict_coverage || file.strict_coverage.unwrap_or(false),
            normalized: flags.normalized || file.normalized.unwrap_or(false),
            negatives: flags.negatives || file.negatives.unwrap_or(false),
            gold: flags.gold.or(file.gold),
            splits: flags.splits.or(file.splits),
            replay: flags.replay.or(file.replay),
            translate_url: flags.translate_url.or(file.translate_url),
            split_name: flags.split_name.or(file.split_name),
            max_attempts: flags.max_attempts.or(file.max_attempts).unwrap_or(20),
            exclude_specials: flags.exclude_specials || file.exclude_specials.unwrap_or(false),
            questions: flags.questions || file.questions.unwrap_or(false),
            tokenizer: flags.tokenizer.or(file.tokenizer).unwrap_or(TokenizerArg::Whitespace),
            smoothing: flags.smoothing.or(file.smoothing).unwrap_or(SmoothingArg::None),
        };
        if config.endpoint.is_some() && config.snapshot.is_some() {
            return Err(CliError::Config("--endpoint and --snapshot are mutually exclusive".into()));
        }
        if config.languages.iter().any(|l| l.is_empty()) {
            return Err(CliError::Config("empty language code".into()));
        }
        Ok(config)
    }

    pub fn language(&self) -> &str {
        &self.languages[0]
    }

    pub fn single_input(&self) -> Result<&Path, CliError> {
        match self.input.as_slice() {
            [one] => Ok(one),
            [] => Err(CliError::Config(format!("`{}` needs --input", self.command.name()))),
            _ => Err(CliError::Config(format!("`{}` takes exactly one --input", self.command.name()))),
        }
    }

    pub fn require<'a, T: ?Sized>(&self, value: &'a Option<impl AsRef<T>>, flag: &str) -> Result<&'a T, CliError> {
        value
            .as_ref()
            .map(AsRef::as_ref)
            .ok_or_else(|| CliError::Config(format!("`{}` needs --{flag}", self.command.name())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("kbqa").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "seed = 9\nlanguages = [\"en\", \"he\"]\noutput = \"out\"\nrps = 2.5\ndeterministic = true\n")
            .unwrap();
        let cli = parse(&["ground", "--config", path.to_str().unwrap(), "--seed", "3"]);
        let config = RunConfig::resolve(cli.command, cli.flags).unwrap();
        assert_eq!(config.seed, 3);
        assert_eq!(config.languages, ["en", "he"]);
        assert_eq!(config.output, PathBuf::from("out"));
        assert_eq!(config.rps, 2.5);
        assert!(config.deterministic);
    }

    #[test]
    fn endpoint_and_snapshot_conflict() {
        assert!(Cli::try_parse_from(["kbqa", "ground", "--endpoint", "http://x", "--snapshot", "s.tsv"]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "snapshot = \"s.tsv\"\noutput = \"o\"\n").unwrap();
        let cli = parse(&["ground", "--config", path.to_str().unwrap(), "--endpoint", "http://x"]);
        assert!(matches!(RunConfig::resolve(cli.command, cli.flags), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "sead = 1\n").unwrap();
        assert!(matches!(ConfigFile::load(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn defaults_apply() {
        let cli = parse(&["stats", "--output", "o", "--languages", "en,zh"]);
        let config = RunConfig::resolve(cli.command, cli.flags).unwrap();
        assert_eq!(config.languages, ["en", "zh"]);
        assert_eq!((config.seed, config.max_inflight, config.max_attempts), (0, 4, 20));
    }
}
