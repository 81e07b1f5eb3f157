//! Corpus scoring: minimum edit distance, character-level accuracy (CA)
//! and word-level accuracy (WA).
//!
//! `CA = (1 − Σ character MEDs / total reference characters) · 100`, and
//! WA likewise over whitespace-delimited words. Characters are Unicode
//! scalar codepoints, matching the codec's label granularity. Accuracies
//! can go negative when hypotheses run much longer than references; the
//! formulas permit it and no clamping is applied.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Levenshtein distance with unit insert/delete/substitute costs.
pub fn min_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Two-row dynamic program.
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let cost = usize::from(ai != bj);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Character-level MED over scalar codepoints.
pub fn char_distance(a: &str, b: &str) -> usize {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    min_edit_distance(&av, &bv)
}

/// Word-level MED over whitespace-delimited tokens.
pub fn word_distance(a: &str, b: &str) -> usize {
    let av: Vec<&str> = a.split_whitespace().collect();
    let bv: Vec<&str> = b.split_whitespace().collect();
    min_edit_distance(&av, &bv)
}

/// One (hypothesis, reference) pair to score.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub id: String,
    pub hypothesis: String,
    pub reference: String,
}

/// Corpus accuracy report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub total_chars: usize,
    pub char_med_sum: usize,
    pub total_words: usize,
    pub word_med_sum: usize,
    pub ca_percent: f64,
    pub wa_percent: f64,
    /// Per line: (id, character MED, word MED).
    pub per_line: Vec<(String, usize, usize)>,
}

impl EvalReport {
    /// CSV body: one `line_id,char_med,word_med` row per line, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("line_id,char_med,word_med\n");
        for (id, cm, wm) in &self.per_line {
            let _ = writeln!(out, "{id},{cm},{wm}");
        }
        out
    }

    /// Human-readable block for standard output.
    pub fn summary(&self) -> String {
        format!(
            "lines: {}\ncharacters: {} (MED sum {})\nwords: {} (MED sum {})\n\
             character accuracy: {:.2}%\nword accuracy: {:.2}%\n",
            self.per_line.len(),
            self.total_chars,
            self.char_med_sum,
            self.total_words,
            self.word_med_sum,
            self.ca_percent,
            self.wa_percent
        )
    }
}

/// Score a corpus of hypothesis/reference pairs. Totals count the
/// references; both must be nonzero for the percentages to exist.
pub fn score_corpus(pairs: &[ScoredPair]) -> Result<EvalReport> {
    let mut total_chars = 0usize;
    let mut total_words = 0usize;
    let mut char_med_sum = 0usize;
    let mut word_med_sum = 0usize;
    let mut per_line = Vec::with_capacity(pairs.len());

    for pair in pairs {
        let cm = char_distance(&pair.hypothesis, &pair.reference);
        let wm = word_distance(&pair.hypothesis, &pair.reference);
        total_chars += pair.reference.chars().count();
        total_words += pair.reference.split_whitespace().count();
        char_med_sum += cm;
        word_med_sum += wm;
        per_line.push((pair.id.clone(), cm, wm));
    }

    if total_chars == 0 {
        return Err(Error::UndefinedMetric(
            "no reference characters in the corpus".into(),
        ));
    }
    if total_words == 0 {
        return Err(Error::UndefinedMetric(
            "no reference words in the corpus".into(),
        ));
    }

    Ok(EvalReport {
        total_chars,
        char_med_sum,
        total_words,
        word_med_sum,
        ca_percent: (1.0 - char_med_sum as f64 / total_chars as f64) * 100.0,
        wa_percent: (1.0 - word_med_sum as f64 / total_words as f64) * 100.0,
        per_line,
    })
}
