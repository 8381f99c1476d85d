//! Word frequency tables and the high/low frequency word samples.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CaseMode {
    #[default]
    Sensitive,
    Lower,
}

/// Whitespace-split tokens with leading/trailing punctuation stripped.
/// Punctuation-only tokens and tokens containing digits are dropped.
pub fn tokenize_words(line: &str) -> impl Iterator<Item = &str> {
    line.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty() && !t.chars().any(char::is_numeric))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordFrequencyTable {
    counts: HashMap<String, u64>,
    case: CaseMode,
}

impl WordFrequencyTable {
    pub fn new(case: CaseMode) -> Self {
        WordFrequencyTable { counts: HashMap::new(), case }
    }

    pub fn from_lines<S: AsRef<str>>(lines: impl IntoIterator<Item = S>, case: CaseMode) -> Self {
        let mut t = Self::new(case);
        for l in lines {
            t.add_line(l.as_ref());
        }
        t
    }

    /// Table from explicit counts; zero counts are ignored.
    pub fn from_counts<S: Into<String>>(counts: impl IntoIterator<Item = (S, u64)>) -> Self {
        let counts = counts.into_iter().filter(|(_, c)| *c > 0).map(|(w, c)| (w.into(), c)).collect();
        WordFrequencyTable { counts, case: CaseMode::Sensitive }
    }

    pub fn add_line(&mut self, line: &str) {
        for tok in tokenize_words(line) {
            let key = match self.case {
                CaseMode::Sensitive => tok.to_string(),
                CaseMode::Lower => tok.to_lowercase(),
            };
            *self.counts.entry(key).or_insert(0) += 1;
        }
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries by descending count, then ascending word.
    pub fn sorted(&self) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self.counts.iter().map(|(w, c)| (w.clone(), *c)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBuckets {
    pub high: Vec<(String, u64)>,
    pub low: Vec<(String, u64)>,
    /// Fewer words were available than requested.
    pub short: bool,
}

/// The `high_k` most frequent words, and the `low_k` remaining words whose
/// counts are closest to `low_target` (ties by word).
pub fn frequency_buckets(
    table: &WordFrequencyTable,
    high_k: usize,
    low_target: u64,
    low_k: usize,
) -> Result<FrequencyBuckets> {
    if table.is_empty() {
        return Err(Error::precondition("frequency table is empty"));
    }
    let mut sorted = table.sorted();
    let rest = sorted.split_off(high_k.min(sorted.len()));
    let high = sorted;
    let mut low = rest;
    low.sort_unstable_by(|a, b| a.1.abs_diff(low_target).cmp(&b.1.abs_diff(low_target)).then_with(|| a.0.cmp(&b.0)));
    low.truncate(low_k);
    let short = high.len() < high_k || low.len() < low_k;
    Ok(FrequencyBuckets { high, low, short })
}
