//! Synthetic authorship corpora with planted marker words.
//!
//! Every author writes from the same Zipf-shaped background vocabulary,
//! tilted per author by a lognormal factor on each word's weight
//! (`style_spread` is the log-scale standard deviation; 0 gives identical
//! background usage). Each author additionally uses a few marker words of
//! their own at an elevated rate. A small share of marker tokens leaks into
//! other authors' documents so markers are frequent for one author rather
//! than exclusive to them. The manifest records the markers and the exact word counts that
//! were written.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_authors: usize,
    pub docs_per_author: usize,
    pub tokens_per_doc: usize,
    pub marker_words_per_author: usize,
    pub seed: u64,
    /// Size of the shared background vocabulary.
    pub background_vocab: usize,
    /// Zipf exponent of the background distribution.
    pub zipf_exponent: f64,
    /// Probability that a token is a marker word.
    pub marker_rate: f64,
    /// Share of marker tokens drawn from another author's markers.
    pub marker_leak: f64,
    /// Log-scale spread of the per-author background tilt.
    pub style_spread: f64,
}

impl SynthConfig {
    pub fn new(
        n_authors: usize,
        docs_per_author: usize,
        tokens_per_doc: usize,
        marker_words_per_author: usize,
        seed: u64,
    ) -> Self {
        SynthConfig {
            n_authors,
            docs_per_author,
            tokens_per_doc,
            marker_words_per_author,
            seed,
            background_vocab: 150,
            zipf_exponent: 1.0,
            marker_rate: 0.01,
            marker_leak: 0.1,
            style_spread: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        let counts = [
            ("n_authors", self.n_authors),
            ("docs_per_author", self.docs_per_author),
            ("tokens_per_doc", self.tokens_per_doc),
            ("marker_words_per_author", self.marker_words_per_author),
            ("background_vocab", self.background_vocab),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.marker_rate) || !(0.0..=1.0).contains(&self.marker_leak) {
            return Err(Error::config("marker_rate and marker_leak must lie in [0, 1]"));
        }
        // Written so NaN fails too.
        let nonnegative = |v: f64| v >= 0.0;
        if !nonnegative(self.zipf_exponent) || !nonnegative(self.style_spread) {
            return Err(Error::config(
                "zipf_exponent and style_spread must be nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthAuthor {
    pub name: String,
    pub markers: Vec<String>,
    pub documents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub authors: Vec<SynthAuthor>,
    /// Total occurrences of every written word across the corpus.
    pub word_counts: BTreeMap<String, u64>,
}

impl SynthManifest {
    pub fn all_markers(&self) -> BTreeSet<&str> {
        self.authors
            .iter()
            .flat_map(|a| a.markers.iter().map(String::as_str))
            .collect()
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

const ONSETS: &[&str] = &[
    "b", "br", "c", "d", "dr", "f", "g", "gl", "h", "k", "l", "m", "n", "p", "pr", "r", "s", "st", "t", "tr",
    "v", "w", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

fn pseudo_word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
    }
    w
}

fn distinct_words<R: Rng>(rng: &mut R, n: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(rng);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Renders tokens as prose: sentences of a few words, first word
/// capitalised, a period at the end, a line break every few sentences.
fn render<R: Rng>(tokens: &[String], rng: &mut R) -> String {
    let mut text = String::new();
    let mut i = 0;
    let mut sentences = 0;
    while i < tokens.len() {
        let len = rng.gen_range(4..=14).min(tokens.len() - i);
        for (j, t) in tokens[i..i + len].iter().enumerate() {
            if j == 0 {
                let mut cs = t.chars();
                if let Some(first) = cs.next() {
                    text.extend(first.to_uppercase());
                    text.push_str(cs.as_str());
                }
            } else {
                text.push(if j % 5 == 0 { ',' } else { ' ' });
                if j % 5 == 0 {
                    text.push(' ');
                }
                text.push_str(t);
            }
        }
        text.push('.');
        i += len;
        sentences += 1;
        text.push(if sentences % 4 == 0 { '\n' } else { ' ' });
    }
    text
}

/// Writes `root/<author>/doc_<n>.txt` files plus `manifest.json`.
pub fn make_synthetic_corpus(root: &Path, cfg: &SynthConfig) -> Result<SynthManifest> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut taken = BTreeSet::new();
    let background = distinct_words(&mut rng, cfg.background_vocab, &mut taken);
    let marker_sets: Vec<Vec<String>> = (0..cfg.n_authors)
        .map(|_| distinct_words(&mut rng, cfg.marker_words_per_author, &mut taken))
        .collect();
    let weights: Vec<f64> = (0..background.len())
        .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
        .collect();
    let tilt = LogNormal::new(0.0, cfg.style_spread).map_err(|e| Error::config(e.to_string()))?;
    let styles: Vec<WeightedIndex<f64>> = (0..cfg.n_authors)
        .map(|_| {
            let tilted: Vec<f64> = weights.iter().map(|w| w * tilt.sample(&mut rng)).collect();
            WeightedIndex::new(&tilted).map_err(|e| Error::Internal(e.to_string()))
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let width = (cfg.n_authors.max(cfg.docs_per_author)).to_string().len().max(2);
    let mut authors = Vec::with_capacity(cfg.n_authors);
    let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();

    for (a, markers) in marker_sets.iter().enumerate() {
        let name = format!("author_{a:0width$}");
        let dir = root.join(&name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut documents = Vec::with_capacity(cfg.docs_per_author);
        for d in 0..cfg.docs_per_author {
            let mut tokens = Vec::with_capacity(cfg.tokens_per_doc);
            for _ in 0..cfg.tokens_per_doc {
                let word = if rng.gen_bool(cfg.marker_rate) {
                    let source = if cfg.n_authors > 1 && rng.gen_bool(cfg.marker_leak) {
                        let other = rng.gen_range(0..cfg.n_authors - 1);
                        &marker_sets[if other >= a { other + 1 } else { other }]
                    } else {
                        markers
                    };
                    &source[rng.gen_range(0..source.len())]
                } else {
                    &background[styles[a].sample(&mut rng)]
                };
                *word_counts.entry(word.clone()).or_default() += 1;
                tokens.push(word.clone());
            }
            let file = format!("doc_{d:0width$}.txt");
            let path = dir.join(&file);
            fs::write(&path, render(&tokens, &mut rng)).map_err(|e| Error::io(&path, e))?;
            documents.push(format!("{name}/{file}"));
        }
        authors.push(SynthAuthor {
            name,
            markers: markers.clone(),
            documents,
        });
    }

    let manifest = SynthManifest {
        config: cfg.clone(),
        authors,
        word_counts,
    };
    let path = root.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
