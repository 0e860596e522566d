//! Placeholder and bracket handling for question text in any script.

use std::collections::BTreeMap;

use crate::sparql::Placeholder;

/// Byte spans and values of `M<digits>` placeholder tokens in `text`.
///
/// A token must not be glued to a preceding ASCII letter/digit or to a
/// following ASCII letter; neighbouring non-Latin characters are fine, so `M0的` in a
/// Chinese question still yields `M0`.
pub fn placeholder_spans(text: &str) -> Vec<(usize, usize, Placeholder)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'M' && (i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_')) {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let followed_by_word = j < bytes.len() && (bytes[j].is_ascii_alphabetic() || bytes[j] == b'_');
            if j > i + 1 && !followed_by_word {
                if let Ok(p) = text[i..j].parse::<Placeholder>() {
                    out.push((i, j, p));
                    i = j;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

/// Multiset of placeholder tokens in `text`.
pub fn placeholder_multiset(text: &str) -> BTreeMap<Placeholder, usize> {
    let mut counts = BTreeMap::new();
    for (_, _, p) in placeholder_spans(text) {
        *counts.entry(p).or_default() += 1;
    }
    counts
}

/// Replaces each placeholder token via `f`; text between tokens is copied.
pub fn replace_placeholders<E>(text: &str, mut f: impl FnMut(Placeholder) -> Result<String, E>) -> Result<String, E> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (start, end, p) in placeholder_spans(text) {
        out.push_str(&text[last..start]);
        out.push_str(&f(p)?);
        last = end;
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// Number of `[...]` groups if the brackets are balanced and not nested.
pub fn bracket_groups(text: &str) -> Option<usize> {
    let mut open = false;
    let mut groups = 0;
    for c in text.chars() {
        match c {
            '[' if open => return None,
            '[' => open = true,
            ']' if !open => return None,
            ']' => {
                open = false;
                groups += 1;
            }
            _ => {}
        }
    }
    (!open).then_some(groups)
}
