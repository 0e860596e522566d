//! Runs the `kbqa` binary against the fixtures in `tests/fixtures`.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn kbqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbqa")).args(args).env("RUST_LOG", "warn").output().expect("kbqa binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// `migrate` with the fixture mapping and specials; panics on failure.
pub fn migrate(input: &Path, output: &Path) {
    let out = kbqa(&[
        "migrate",
        "--input",
        path_str(input),
        "--mapping",
        path_str(&fixture("mapping.tsv")),
        "--specials",
        path_str(&fixture("specials.tsv")),
        "--output",
        path_str(output),
    ]);
    assert_eq!(code(&out), 0, "migrate: {}", String::from_utf8_lossy(&out.stderr));
}

/// `ground` against the fixture snapshot in deterministic mode.
pub fn ground_snapshot(input: &Path, output: &Path, extra: &[&str]) -> Output {
    let triples = fixture("snapshot_triples.tsv");
    let labels = fixture("snapshot_labels.tsv");
    let specials = fixture("specials.tsv");
    let mut args = vec![
        "ground",
        "--input",
        path_str(input),
        "--snapshot",
        path_str(&triples),
        "--labels",
        path_str(&labels),
        "--specials",
        path_str(&specials),
        "--deterministic",
        "--output",
        path_str(output),
    ];
    args.extend_from_slice(extra);
    kbqa(&args)
}
