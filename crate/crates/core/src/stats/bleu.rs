//! Corpus-level BLEU with a single reference per segment.
//!
//! Tokenization: the rule-engine normalization, then every Unicode
//! punctuation character becomes its own token and the rest splits on
//! whitespace. Case-sensitive, no smoothing. An n-gram order for which
//! neither side has any n-grams is left out of the geometric mean; if only
//! the references have such n-grams the precision is zero.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::rules::normalize;

pub const MAX_ORDER: usize = 4;

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}|[^\s\p{P}]+").expect("token pattern compiles"))
}

pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = normalize(text);
    token_re()
        .find_iter(&normalized)
        .map(|m| m.as_str().to_owned())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU in `[0, 100]`.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matched = [0usize; MAX_ORDER];
    let mut hyp_total = [0usize; MAX_ORDER];
    let mut ref_total = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let h = tokenize(h.as_ref());
        let r = tokenize(r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for order in 1..=MAX_ORDER {
            let hc = ngram_counts(&h, order);
            let rc = ngram_counts(&r, order);
            hyp_total[order - 1] += h.len().saturating_sub(order - 1);
            ref_total[order - 1] += r.len().saturating_sub(order - 1);
            matched[order - 1] += hc
                .iter()
                .map(|(gram, &c)| c.min(rc.get(gram).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    if hyp_len == 0 {
        return Ok(if ref_len == 0 { 100.0 } else { 0.0 });
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for i in 0..MAX_ORDER {
        if hyp_total[i] == 0 && ref_total[i] == 0 {
            continue;
        }
        if matched[i] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[i] as f64 / hyp_total[i] as f64).ln();
        orders += 1;
    }
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok((100.0 * brevity * (log_sum / orders as f64).exp()).min(100.0))
}
