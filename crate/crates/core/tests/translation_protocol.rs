use std::collections::BTreeMap;
use std::sync::Mutex;

use kbqa_core::dataset::{DatasetEntry, QuestionKind};
use kbqa_core::grounding::QueryResult;
use kbqa_core::translation::{
    postprocess_mt, prepare_for_mt, translate_entries, translate_entry, DictionaryClient, JobStatus, ReplayCache,
    ReplayClient, ReplayRecord, TranslationClient, TranslationError, TERMINAL_MARKS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Questions in several scripts, never ending in whitespace or a terminal mark.
fn question() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        "[A-Za-z']{1,8}",
        "M[0-9]",
        "\\[[A-Za-z ]{1,10}\\]",
        "[\u{4e00}-\u{4e40}]{1,4}",
        "[\u{05d0}-\u{05ea}]{1,6}",
        "[\u{0c85}-\u{0cb9}]{1,6}",
        "[?？؟]",
    ];
    (prop::collection::vec(word, 1..10), "[a-z\u{4e00}-\u{4e10}]")
        .prop_map(|(words, last)| format!("{} {last}", words.join(" ")))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prepare_then_postprocess_is_identity(q in question(), mark in 0usize..3, pad in "[ \t]{0,2}") {
        let sent = prepare_for_mt(&q).unwrap();
        prop_assert!(sent.ends_with('?'));
        prop_assert_eq!(postprocess_mt(&sent), q.clone());
        // A translator may swap in its own script's mark and pad the end.
        let echoed = format!("{}{}{pad}", &sent[..sent.len() - 1], TERMINAL_MARKS[mark]);
        prop_assert_eq!(postprocess_mt(&echoed), q);
    }
}

/// Corrupts a placeholder in a random subset of calls and records which.
struct Corrupting {
    rng: Mutex<ChaCha8Rng>,
    corrupted: Mutex<Vec<String>>,
}

impl TranslationClient for Corrupting {
    fn translate(&self, text: &str, _source: &str, _target: &str) -> Result<String, TranslationError> {
        let mut rng = self.rng.lock().unwrap();
        if !text.contains("M1") || rng.random_bool(0.5) {
            return Ok(text.to_string());
        }
        let out = match rng.random_range(0..3) {
            0 => text.replacen("M1", "", 1),
            1 => text.replacen("M1", "M1 M1", 1),
            _ => text.replacen("M1", "M7", 1),
        };
        self.corrupted.lock().unwrap().push(text.to_string());
        Ok(out)
    }
}

fn entry(id: u64, pattern: &str, bracketed: &str) -> DatasetEntry {
    DatasetEntry {
        id,
        question_with_brackets: [("en".to_string(), bracketed.to_string())].into(),
        question_pattern_mod_entities: [("en".to_string(), pattern.to_string())].into(),
        sparql: String::new(),
        sparql_pattern_mod_entities: String::new(),
        recursion_depth: 1,
        expected_response: QueryResult::Boolean(true),
        question_kind: QuestionKind::YesNo,
        negative_of: None,
    }
}

#[test]
fn every_corrupted_pattern_is_flagged() {
    let entries: Vec<DatasetEntry> = (0..200)
        .map(|i| entry(i, &format!("Did M0 direct M1 and edit M{}", 2 + i % 3), &format!("Did [film {i}] win")))
        .collect();
    let client = Corrupting { rng: Mutex::new(ChaCha8Rng::seed_from_u64(1)), corrupted: Mutex::new(Vec::new()) };
    let targets = vec!["he".to_string(), "kn".to_string(), "zh".to_string()];
    let results = translate_entries(&entries, &client, "en", &targets, 4);
    let corrupted = client.corrupted.lock().unwrap().len();
    let mut flagged = 0;
    for r in &results {
        for job in &r.jobs {
            match &job.status {
                JobStatus::PlaceholderLoss { .. } => flagged += 1,
                JobStatus::Done { output } => assert_eq!(*output, job.source_text),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
    assert!(corrupted > 100, "only {corrupted} corruptions injected");
    assert_eq!(flagged, corrupted);
}

#[test]
fn replays_the_published_translations() {
    let english = entry(0, "Did M0 's male actor marry M2", "Did [Lohengrin] 's male actor marry [Margarete Joswig]");
    let published: [(&str, &str, &str, char); 3] = [
        ("he", "האם השחקן הגברי של M0 התחתן עם M2", "האם השחקן הגברי של [לוהנגרין] התחתן עם [מרגרט יוסוויג]", '?'),
        ("kn", "M0 ನ ಪುರುಷ ನಟ M2 ಅನ್ನು ಮದುವೆಯಾಗಿದ್ದಾರೆಯೇ", "[ಲೋಹೆಂಗ್ರಿನ್] ಅವರ ಪುರುಷ ನಟ ವಿವಾಹವಾದರು [ಮಾರ್ಗರೆಟ್ ಜೋಸ್ವಿಗ್]", '?'),
        ("zh", "M0的男演员和M2结婚吗", "[Lohengrin]的男演员嫁给了[Margarete Joswig]吗", '？'),
    ];
    let cache = ReplayCache::in_memory();
    for (lang, pattern, bracketed, mark) in published {
        for (source, output) in [
            (&english.question_pattern_mod_entities["en"], pattern),
            (&english.question_with_brackets["en"], bracketed),
        ] {
            cache
                .record(ReplayRecord {
                    source: "en".into(),
                    target_lang: lang.into(),
                    input: format!("{source}?"),
                    output: format!("{output}{mark}"),
                })
                .unwrap();
        }
    }
    let client: ReplayClient<DictionaryClient> = ReplayClient::new(cache, None);
    let targets: Vec<String> = published.iter().map(|p| p.0.to_string()).collect();
    let result = translate_entry(&english, &client, "en", &targets);
    assert!(result.is_complete(), "{:?}", result.jobs);
    let want_patterns: BTreeMap<String, String> =
        std::iter::once(("en".to_string(), english.question_pattern_mod_entities["en"].clone()))
            .chain(published.iter().map(|(l, p, _, _)| (l.to_string(), p.to_string())))
            .collect();
    assert_eq!(result.entry.question_pattern_mod_entities, want_patterns);
    for (lang, _, bracketed, _) in published {
        assert_eq!(result.entry.question_with_brackets[lang], bracketed);
    }
    assert_eq!(result.entry.sparql, english.sparql);

    // A target missing from the cache with no live client fails that job only.
    let result = translate_entry(&english, &client, "en", &["de".to_string(), "he".to_string()]);
    assert!(result.is_partial());
    assert_eq!(result.entry.question_with_brackets.get("he").map(String::as_str), Some(published[0].2));
    assert!(!result.entry.question_with_brackets.contains_key("de"));
}
