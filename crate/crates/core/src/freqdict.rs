//! Corpus frequency dictionary and the bounded-frequency keyword pool drawn
//! from it.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictEntry {
    pub word: String,
    pub count: u64,
    pub frequency: f64,
}

/// Words ranked by relative frequency, highest first, ties by word.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDictionary {
    entries: Vec<DictEntry>,
    total_tokens: u64,
}

impl FrequencyDictionary {
    /// Builds a dictionary from raw `(word, count)` pairs.
    pub fn from_counts<I, S>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (w, c) in counts {
            if c > 0 {
                *merged.entry(w.into()).or_default() += c;
            }
        }
        let total_tokens: u64 = merged.values().sum();
        if total_tokens == 0 {
            return Err(Error::input("frequency dictionary needs at least one token"));
        }
        let mut entries: Vec<DictEntry> = merged
            .into_iter()
            .map(|(word, count)| DictEntry {
                word,
                count,
                frequency: count as f64 / total_tokens as f64,
            })
            .collect();
        // Count order is frequency order, without float comparisons.
        entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
        Ok(FrequencyDictionary {
            entries,
            total_tokens,
        })
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequency(&self, word: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.word == word).map(|e| e.frequency)
    }

    /// CSV with columns `word,count,frequency`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["word", "count", "frequency"])?;
        for e in &self.entries {
            w.write_record([e.word.clone(), e.count.to_string(), e.frequency.to_string()])?;
        }
        w.flush()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        Ok(())
    }
}

/// Counts every token of the documents named in `doc_ids`.
pub fn build_frequency_dictionary<S: AsRef<str>>(
    corpus: &Corpus,
    doc_ids: &[S],
) -> Result<FrequencyDictionary> {
    if doc_ids.is_empty() {
        return Err(Error::input("no documents selected for the frequency dictionary"));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for id in doc_ids {
        let id = id.as_ref();
        let doc = corpus
            .document(id)
            .ok_or_else(|| Error::input(format!("unknown document id '{id}'")))?;
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    FrequencyDictionary::from_counts(counts)
}

/// Frequency window `[p_min, p_max)` and a cap on the number of words kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub max_words: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            p_min: 0.0,
            p_max: 1e-3,
            max_words: 1000,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_min >= 0.0 && self.p_min < self.p_max && self.p_max <= 1.0) {
            return Err(Error::config(format!(
                "pool bounds must satisfy 0 <= p_min < p_max <= 1, got [{}, {})",
                self.p_min, self.p_max
            )));
        }
        if self.max_words == 0 {
            return Err(Error::config("max_words must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, frequency: f64) -> bool {
        self.p_min <= frequency && frequency < self.p_max
    }
}

/// The gene pool: qualifying words in dictionary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordPool {
    pub words: Vec<String>,
    pub source_frequencies: Vec<f64>,
}

impl KeywordPool {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Observed `(min, max)` frequency among pool words.
    pub fn frequency_range(&self) -> Option<(f64, f64)> {
        let min = self.source_frequencies.iter().copied().reduce(f64::min)?;
        let max = self.source_frequencies.iter().copied().reduce(f64::max)?;
        Some((min, max))
    }

    /// CSV with columns `rank,word,frequency`; rank starts at 0 and equals
    /// the gene index.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "word", "frequency"])?;
        for (i, (word, f)) in self.words.iter().zip(&self.source_frequencies).enumerate() {
            w.write_record([i.to_string(), word.clone(), f.to_string()])?;
        }
        w.flush()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        Ok(())
    }
}

/// Keeps dictionary entries with frequency in `[p_min, p_max)`, then the
/// first `max_words` of those.
pub fn select_pool(dict: &FrequencyDictionary, cfg: &PoolConfig) -> Result<KeywordPool> {
    cfg.validate()?;
    if dict.is_empty() {
        return Err(Error::input("frequency dictionary is empty"));
    }
    let (words, source_frequencies): (Vec<String>, Vec<f64>) = dict
        .entries()
        .iter()
        .filter(|e| cfg.contains(e.frequency))
        .take(cfg.max_words)
        .map(|e| (e.word.clone(), e.frequency))
        .unzip();
    if words.is_empty() {
        // Entries are frequency-descending.
        let hi = dict.entries().first().map_or(0.0, |e| e.frequency);
        let lo = dict.entries().last().map_or(0.0, |e| e.frequency);
        return Err(Error::config(format!(
            "no dictionary word has frequency in [{}, {}); observed range is [{lo}, {hi}]",
            cfg.p_min, cfg.p_max
        )));
    }
    Ok(KeywordPool {
        words,
        source_frequencies,
    })
}
