//! Reference-based automatic metrics: Levenshtein distance, chrF and BLEU,
//! plus post-editing summaries.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocols::ScorePayload;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("{0} candidates but {1} references")]
    LengthMismatch(usize, usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("post-edit report needs a post-editing payload")]
    WrongPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Bleu,
    Chrf,
    Levenshtein,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Bleu => "bleu",
            MetricKind::Chrf => "chrf",
            MetricKind::Levenshtein => "levenshtein",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sentence,
    Corpus,
}

/// BLEU in `[0, 1]`, chrF in `[0, 100]`, Levenshtein a non-negative integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricKind,
    pub value: f64,
    pub granularity: Granularity,
}

/// JSONL line emitted by metric commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub item_id: String,
    pub metric: MetricKind,
    pub value: f64,
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

fn counts<T: Hash + Eq + Clone>(units: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut map = HashMap::new();
    if units.len() >= n {
        for w in units.windows(n) {
            *map.entry(w).or_insert(0) += 1;
        }
    }
    map
}

fn overlap<T: Hash + Eq>(cand: &HashMap<&[T], usize>, reference: &HashMap<&[T], usize>) -> usize {
    cand.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Character n-gram F-score, times 100.
///
/// Whitespace is stripped before extraction. Per order, precision and
/// recall give an F_beta; the score is the mean F over orders for which
/// both strings have at least one n-gram.
pub fn chrf(candidate: &str, reference: &str, order: usize, beta: f64) -> Result<f64, MetricError> {
    if order == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let cand: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let refr: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let b2 = beta * beta;
    let mut total = 0.0;
    let mut effective = 0usize;
    for n in 1..=order {
        let (hyp_total, ref_total) = (
            cand.len().saturating_sub(n - 1),
            refr.len().saturating_sub(n - 1),
        );
        if hyp_total == 0 || ref_total == 0 {
            continue;
        }
        effective += 1;
        let matched = overlap(&counts(&cand, n), &counts(&refr, n));
        if matched == 0 {
            continue;
        }
        let p = matched as f64 / hyp_total as f64;
        let r = matched as f64 / ref_total as f64;
        total += (1.0 + b2) * p * r / (b2 * p + r);
    }
    if effective == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * total / effective as f64)
}

/// Splits a sentence into BLEU tokens.
pub trait Tokenizer {
    fn name(&self) -> &str;
    fn tokenize(&self, text: &str) -> Vec<String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }
}

/// Every non-whitespace character is a token. A rough stand-in for
/// subword tokenization when no subword model is available.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharTokenizer;

impl Tokenizer for CharTokenizer {
    fn name(&self) -> &str {
        "char"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinTokenizer {
    Whitespace,
    Char,
}

impl BuiltinTokenizer {
    pub fn get(self) -> &'static dyn Tokenizer {
        match self {
            BuiltinTokenizer::Whitespace => &WhitespaceTokenizer,
            BuiltinTokenizer::Char => &CharTokenizer,
        }
    }
}

impl FromStr for BuiltinTokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" | "ws" => Ok(BuiltinTokenizer::Whitespace),
            "char" | "character" => Ok(BuiltinTokenizer::Char),
            other => Err(format!("unknown tokenizer {other:?} (whitespace, char)")),
        }
    }
}

pub const BLEU_MAX_N: usize = 4;

/// Clipped matches and candidate n-gram totals per order, plus lengths.
#[derive(Debug, Clone, Default, PartialEq)]
struct BleuStats {
    matches: Vec<usize>,
    totals: Vec<usize>,
    cand_len: usize,
    ref_len: usize,
}

impl BleuStats {
    fn new(max_n: usize) -> Self {
        Self {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            ..Self::default()
        }
    }

    fn add(&mut self, cand: &[String], reference: &[String]) {
        self.cand_len += cand.len();
        self.ref_len += reference.len();
        for n in 1..=self.matches.len() {
            self.matches[n - 1] += overlap(&counts(cand, n), &counts(reference, n));
            self.totals[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }

    fn brevity_penalty(&self) -> f64 {
        if self.cand_len == 0 {
            0.0
        } else if self.cand_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        }
    }

    fn score(&self, smooth: bool) -> f64 {
        let bp = self.brevity_penalty();
        if bp == 0.0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for (i, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            let (m, t) = if smooth && i > 0 {
                (m + 1, t + 1)
            } else {
                (m, t)
            };
            if m == 0 || t == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
        }
        bp * (log_sum / self.matches.len() as f64).exp()
    }
}

/// Corpus BLEU in `[0, 1]`: clipped n-gram precisions pooled over the
/// corpus, geometric mean up to `max_n`, brevity penalty, no smoothing.
pub fn bleu<S: AsRef<str>>(
    candidates: &[S],
    references: &[S],
    tokenizer: &dyn Tokenizer,
    max_n: usize,
) -> Result<f64, MetricError> {
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch(
            candidates.len(),
            references.len(),
        ));
    }
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if max_n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let mut stats = BleuStats::new(max_n);
    for (c, r) in candidates.iter().zip(references) {
        stats.add(
            &tokenizer.tokenize(c.as_ref()),
            &tokenizer.tokenize(r.as_ref()),
        );
    }
    Ok(stats.score(false))
}

/// Sentence BLEU with add-one smoothing on precisions of order two and up.
pub fn sentence_bleu(
    candidate: &str,
    reference: &str,
    tokenizer: &dyn Tokenizer,
    max_n: usize,
) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let mut stats = BleuStats::new(max_n);
    stats.add(
        &tokenizer.tokenize(candidate),
        &tokenizer.tokenize(reference),
    );
    Ok(stats.score(true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    pub item_id: String,
    pub levenshtein: usize,
    pub chrf: f64,
    pub critical_errors: u32,
}

/// Edit magnitude of a post-edit: distance and chrF of the original
/// translation (as candidate) against the edited text.
pub fn pe_report(
    item_id: &str,
    original_mt: &str,
    payload: &ScorePayload,
) -> Result<PeReport, MetricError> {
    let ScorePayload::PostEdit {
        edited_text,
        critical_errors,
    } = payload
    else {
        return Err(MetricError::WrongPayload);
    };
    Ok(PeReport {
        item_id: item_id.to_string(),
        levenshtein: levenshtein(original_mt, edited_text),
        chrf: chrf(original_mt, edited_text, CHRF_ORDER, CHRF_BETA)?,
        critical_errors: *critical_errors,
    })
}
