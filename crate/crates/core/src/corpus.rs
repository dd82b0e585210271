//! Labeled text corpora: loading, tokenization and seeded train/test splits.
//!
//! A corpus on disk is a directory with one subdirectory per author; every
//! regular file inside a subdirectory is one document of that author.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on resampling attempts when a split leaves a category out of
/// the training half.
pub const MAX_SPLIT_ATTEMPTS: usize = 1000;

/// An author category with its dense index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryId {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
    pub category: CategoryId,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, category: CategoryId, tokens: Vec<String>) -> Self {
        Document {
            id: id.into(),
            category,
            tokens,
        }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Documents sorted by id plus the category table they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    categories: Vec<CategoryId>,
}

impl Corpus {
    /// Builds a corpus from in-memory parts.
    ///
    /// Documents are re-sorted by id. Fails if ids repeat, if a document
    /// names a category that is not in `categories`, or if category indices
    /// are not exactly `0..categories.len()`.
    pub fn new(mut documents: Vec<Document>, categories: Vec<CategoryId>) -> Result<Self> {
        for (i, c) in categories.iter().enumerate() {
            if c.index != i {
                return Err(Error::input(format!(
                    "category '{}' has index {} but sits at position {i}",
                    c.name, c.index
                )));
            }
        }
        documents.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in documents.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::input(format!("duplicate document id '{}'", pair[0].id)));
            }
        }
        for d in &documents {
            if categories.get(d.category.index) != Some(&d.category) {
                return Err(Error::input(format!(
                    "document '{}' has unknown category '{}'",
                    d.id, d.category.name
                )));
            }
        }
        Ok(Corpus {
            documents,
            categories,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn categories(&self) -> &[CategoryId] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.documents[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    /// Debug dump: one JSON object per line with `id`, `category` and
    /// `token_count`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: &'a str,
            category: &'a str,
            token_count: usize,
        }
        for d in &self.documents {
            let line = Line {
                id: &d.id,
                category: &d.category.name,
                token_count: d.token_count(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Text encodings accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextEncoding {
    #[default]
    Utf8,
    Latin1,
}

impl FromStr for TextEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "utf8" | "utf-8" => Ok(TextEncoding::Utf8),
            "latin1" | "latin-1" | "iso-8859-1" => Ok(TextEncoding::Latin1),
            other => Err(Error::config(format!("unknown encoding '{other}'"))),
        }
    }
}

impl std::fmt::Display for TextEncoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TextEncoding::Utf8 => "utf8",
            TextEncoding::Latin1 => "latin1",
        })
    }
}

/// Decodes raw bytes; invalid UTF-8 is reported with its byte offset.
pub fn decode(bytes: &[u8], encoding: TextEncoding) -> Result<String> {
    match encoding {
        TextEncoding::Utf8 => match std::str::from_utf8(bytes) {
            Ok(s) => Ok(s.to_owned()),
            Err(e) => Err(Error::input(format!(
                "invalid UTF-8 at byte offset {}",
                e.valid_up_to()
            ))),
        },
        TextEncoding::Latin1 => Ok(bytes.iter().map(|&b| b as char).collect()),
    }
}

/// Lowercased maximal runs of alphabetic characters.
///
/// Everything else (digits, punctuation, apostrophes, whitespace) separates
/// tokens, so `"don't"` yields `["don", "t"]`.
pub fn tokenize(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in raw.chars() {
        if ch.is_alphabetic() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Reads a corpus laid out as `root/<author>/<file>`.
///
/// Categories are indexed in lexicographic order of directory names. Hidden
/// entries (leading `.`) are skipped. Files that produce no tokens are logged
/// and left out.
pub fn load_corpus(root: &Path, encoding: TextEncoding) -> Result<Corpus> {
    let entries = fs::read_dir(root)
        .map_err(|e| Error::input(format!("cannot read corpus root {}: {e}", root.display())))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        let ft = entry.file_type().map_err(|e| Error::io(entry.path(), e))?;
        if ft.is_dir() {
            dirs.push(name);
        }
    }
    if dirs.is_empty() {
        return Err(Error::input(format!(
            "{}: no category subdirectories found",
            root.display()
        )));
    }
    dirs.sort();

    let categories: Vec<CategoryId> = dirs
        .iter()
        .enumerate()
        .map(|(index, name)| CategoryId {
            name: name.clone(),
            index,
        })
        .collect();

    let mut jobs = Vec::new();
    for cat in &categories {
        let dir = root.join(&cat.name);
        let mut files = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') {
                continue;
            }
            let path = entry.path();
            if path.is_file() {
                files.push(name);
            }
        }
        if files.is_empty() {
            return Err(Error::input(format!(
                "{}: category '{}' has no files",
                dir.display(),
                cat.name
            )));
        }
        files.sort();
        for f in files {
            jobs.push((cat.clone(), f));
        }
    }

    let loaded: Vec<Result<Option<Document>>> = jobs
        .par_iter()
        .map(|(cat, file)| {
            let path = root.join(&cat.name).join(file);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let text = decode(&bytes, encoding).map_err(|e| e.context(path.display()))?;
            let tokens = tokenize(&text);
            let id = format!("{}/{}", cat.name, file);
            if tokens.is_empty() {
                log::warn!("{id}: no tokens, document excluded");
                return Ok(None);
            }
            Ok(Some(Document::new(id, cat.clone(), tokens)))
        })
        .collect();

    let mut documents = Vec::with_capacity(loaded.len());
    for doc in loaded {
        if let Some(d) = doc? {
            documents.push(d);
        }
    }
    for cat in &categories {
        if !documents.iter().any(|d| d.category.index == cat.index) {
            return Err(Error::input(format!(
                "category '{}' has no documents with tokens",
                cat.name
            )));
        }
    }
    Corpus::new(documents, categories)
}

/// A disjoint train/test partition of document ids, both halves sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Samples `train_count` training ids uniformly without replacement.
///
/// Resamples (up to [`MAX_SPLIT_ATTEMPTS`]) until every corpus category has
/// at least one training document.
pub fn split_corpus(corpus: &Corpus, train_count: usize, seed: u64) -> Result<Split> {
    let items: Vec<(&str, usize)> = corpus
        .documents()
        .iter()
        .map(|d| (d.id.as_str(), d.category.index))
        .collect();
    let (train, test) = split_labeled(&items, train_count, seed)?;
    Ok(Split { train, test, seed })
}

/// Shared sampler behind [`split_corpus`]; `items` are `(id, category)`
/// pairs and every category present in `items` must land in the training
/// half.
pub(crate) fn split_labeled(
    items: &[(&str, usize)],
    train_count: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let n = items.len();
    if train_count == 0 || train_count >= n {
        return Err(Error::config(format!(
            "train_count must be in [1, {n}) for {n} documents, got {train_count}"
        )));
    }
    let required: BTreeSet<usize> = items.iter().map(|&(_, c)| c).collect();
    if train_count < required.len() {
        return Err(Error::config(format!(
            "train_count {train_count} cannot cover {} categories",
            required.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_SPLIT_ATTEMPTS {
        let picked = index::sample(&mut rng, n, train_count);
        let mut in_train = vec![false; n];
        for i in picked.iter() {
            in_train[i] = true;
        }
        let covered: BTreeSet<usize> = (0..n).filter(|&i| in_train[i]).map(|i| items[i].1).collect();
        if covered != required {
            continue;
        }
        let mut train = Vec::with_capacity(train_count);
        let mut test = Vec::with_capacity(n - train_count);
        for (i, &(id, _)) in items.iter().enumerate() {
            if in_train[i] {
                train.push(id.to_owned());
            } else {
                test.push(id.to_owned());
            }
        }
        train.sort();
        test.sort();
        return Ok((train, test));
    }
    Err(Error::config(format!(
        "no split with every category in train after {MAX_SPLIT_ATTEMPTS} attempts \
         (train_count={train_count}, documents={n})"
    )))
}
