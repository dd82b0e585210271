#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use kwsel::synth::{make_synthetic_corpus, SynthConfig, SynthManifest};

/// Independent tokenizer: split on every non-alphabetic char, drop empties,
/// lowercase.
pub fn reference_tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

/// Every `.txt` file under `root`, as (`author/file`, contents), sorted.
pub fn read_tree(root: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for author in fs::read_dir(root).unwrap() {
        let author = author.unwrap().path();
        if !author.is_dir() {
            continue;
        }
        for file in fs::read_dir(&author).unwrap() {
            let file = file.unwrap().path();
            let id = format!(
                "{}/{}",
                author.file_name().unwrap().to_string_lossy(),
                file.file_name().unwrap().to_string_lossy()
            );
            out.push((id, fs::read_to_string(&file).unwrap()));
        }
    }
    out.sort();
    out
}

/// Word counts over the given files, by plain hash-map counting.
pub fn recount<'a>(texts: impl IntoIterator<Item = &'a str>) -> (HashMap<String, u64>, u64) {
    let mut counts = HashMap::new();
    let mut total = 0;
    for text in texts {
        for w in reference_tokenize(text) {
            *counts.entry(w).or_insert(0) += 1;
            total += 1;
        }
    }
    (counts, total)
}

pub struct SynthDir {
    pub dir: tempfile::TempDir,
    pub manifest: SynthManifest,
}

impl SynthDir {
    pub fn path(&self) -> PathBuf {
        self.dir.path().to_path_buf()
    }
}

pub fn synth(cfg: &SynthConfig) -> SynthDir {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_synthetic_corpus(dir.path(), cfg).unwrap();
    SynthDir { dir, manifest }
}

/// The 6-author, 60-document fixture.
pub fn synth60(seed: u64) -> SynthDir {
    synth(&SynthConfig::new(6, 10, 400, 3, seed))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
