//! Corpus BLEU following SacreBLEU's accumulation: clipped n-gram matches
//! and hypothesis n-gram totals are summed over the corpus before the
//! precisions are formed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// A zero n-gram precision makes the score zero.
    #[default]
    None,
    /// Each zero-match order gets precision `1 / (2^k * total)`, k counting
    /// the zero orders seen so far.
    Exp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// Split on Unicode whitespace.
    #[default]
    Whitespace,
    /// Every non-whitespace character is a token (for unsegmented scripts).
    Char,
}

impl Tokenizer {
    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().collect(),
            Tokenizer::Char => text
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Tokenizer::Whitespace => "whitespace",
            Tokenizer::Char => "char",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BleuScore {
    /// 0 to 100.
    pub score: f64,
    /// Per-order precisions, 0 to 100.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
}

fn ngram_counts<'t, 'a>(tokens: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Scores pre-tokenized hypotheses against single references.
pub fn corpus_bleu_tokens(
    refs: &[Vec<&str>],
    hyps: &[Vec<&str>],
    smoothing: Smoothing,
) -> Result<BleuScore, EvalError> {
    if refs.len() != hyps.len() {
        return Err(EvalError::LengthMismatch { golds: refs.len(), preds: hyps.len() });
    }
    if refs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (r, h) in refs.iter().zip(hyps) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(r, n);
            for (gram, count) in ngram_counts(h, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }

    // Ratios rather than percentages keep a perfect match at exactly 100.
    let mut ratios = [0.0f64; MAX_ORDER];
    let mut zero_orders = 0;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            break;
        }
        if matches[n] > 0 {
            ratios[n] = matches[n] as f64 / totals[n] as f64;
        } else if smoothing == Smoothing::Exp {
            zero_orders += 1;
            ratios[n] = 1.0 / (2f64.powi(zero_orders) * totals[n] as f64);
        }
    }
    let brevity_penalty = if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let score = if ratios.contains(&0.0) {
        0.0
    } else {
        100.0 * brevity_penalty * (ratios.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64).exp()
    };
    Ok(BleuScore { score, precisions: ratios.map(|p| 100.0 * p), brevity_penalty, hyp_len, ref_len, matches, totals })
}

/// Corpus BLEU over raw strings with the given tokenizer.
pub fn corpus_bleu(
    golds: &[String],
    preds: &[String],
    tokenizer: Tokenizer,
    smoothing: Smoothing,
) -> Result<BleuScore, EvalError> {
    let refs: Vec<Vec<&str>> = golds.iter().map(|g| tokenizer.tokenize(g)).collect();
    let hyps: Vec<Vec<&str>> = preds.iter().map(|p| tokenizer.tokenize(p)).collect();
    corpus_bleu_tokens(&refs, &hyps, smoothing)
}
