//! End-to-end runs: corpus → frequency dictionary → keyword pool → feature
//! matrices → GA → reports on disk.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, split_corpus, split_labeled, Corpus, Split, TextEncoding};
use crate::error::{Error, Result};
use crate::freqdict::{
    build_frequency_dictionary, select_pool, FrequencyDictionary, KeywordPool, PoolConfig,
};
use crate::ga::{evolve, exhaustive_best, Chromosome, EvolutionTrace, GaConfig, ScoredChromosome};
use crate::knn::{evaluate, EvalReport, KnnConfig};
use crate::vectorspace::{build_feature_matrix, FeatureMatrix};

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";
pub const PER_CATEGORY_FILE: &str = "per_category.csv";
pub const POOL_FILE: &str = "pool.csv";
pub const DICTIONARY_FILE: &str = "dictionary.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Which split the GA's fitness is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalSplitMode {
    /// Train on the training split, score on the test split.
    #[default]
    Test,
    /// Carve a validation subset out of the training split and score on it;
    /// the test split is only touched by the final report.
    Validation,
}

impl FromStr for EvalSplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(EvalSplitMode::Test),
            "validation" => Ok(EvalSplitMode::Validation),
            other => Err(Error::config(format!(
                "eval_split must be 'test' or 'validation', got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for EvalSplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSplitMode::Test => "test",
            EvalSplitMode::Validation => "validation",
        })
    }
}

/// Documents the frequency dictionary is counted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictScope {
    #[default]
    Train,
    Full,
}

impl FromStr for DictScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(DictScope::Train),
            "full" => Ok(DictScope::Full),
            other => Err(Error::config(format!(
                "dict_scope must be 'train' or 'full', got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for DictScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictScope::Train => "train",
            DictScope::Full => "full",
        })
    }
}

/// Everything a run needs. `seed` drives both the split and the GA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus_root: PathBuf,
    pub encoding: TextEncoding,
    pub train_count: usize,
    pub seed: u64,
    pub dict_scope: DictScope,
    pub pool: PoolConfig,
    pub knn: KnnConfig,
    pub ga: GaConfig,
    pub eval_split: EvalSplitMode,
    /// Share of the training split held out in validation mode.
    pub validation_fraction: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_root: PathBuf::new(),
            encoding: TextEncoding::Utf8,
            train_count: 0,
            seed: 0,
            dict_scope: DictScope::Train,
            pool: PoolConfig::default(),
            knn: KnnConfig::default(),
            ga: GaConfig::default(),
            eval_split: EvalSplitMode::Test,
            validation_fraction: 0.25,
            output_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{value}'")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" | "auto" | "off" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`] and in config files.
    pub const KEYS: &'static [&'static str] = &[
        "corpus_root",
        "encoding",
        "train_count",
        "seed",
        "dict_scope",
        "p_min",
        "p_max",
        "max_words",
        "k",
        "pop_size",
        "chromosome_size",
        "elite_count",
        "crossover_fraction",
        "mutation_rate",
        "max_generations",
        "stall_generations",
        "target_fitness",
        "parallel",
        "eval_split",
        "validation_fraction",
        "output_dir",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "corpus_root" => self.corpus_root = PathBuf::from(value),
            "encoding" => self.encoding = value.parse()?,
            "train_count" => self.train_count = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dict_scope" => self.dict_scope = value.parse()?,
            "p_min" => self.pool.p_min = parse(key, value)?,
            "p_max" => self.pool.p_max = parse(key, value)?,
            "max_words" => self.pool.max_words = parse(key, value)?,
            "k" => self.knn.k = parse(key, value)?,
            "pop_size" => self.ga.pop_size = parse(key, value)?,
            "chromosome_size" => self.ga.chromosome_size = parse(key, value)?,
            "elite_count" => self.ga.elite_count = parse(key, value)?,
            "crossover_fraction" => self.ga.crossover_fraction = parse(key, value)?,
            "mutation_rate" => self.ga.mutation_rate = parse_optional(key, value)?,
            "max_generations" => self.ga.max_generations = parse(key, value)?,
            "stall_generations" => self.ga.stall_generations = parse_optional(key, value)?,
            "target_fitness" => self.ga.target_fitness = parse_optional(key, value)?,
            "parallel" => self.ga.parallel = parse(key, value)?,
            "eval_split" => self.eval_split = value.parse()?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "output_dir" => self.output_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(Error::config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| e.context(format!("line {}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_kv(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        if self.knn.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.eval_split == EvalSplitMode::Validation
            && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0)
        {
            return Err(Error::config("validation_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Resolves chromosome indices to pool words, in chromosome order.
pub fn report_words(pool: &KeywordPool, chromosome: &Chromosome) -> Result<Vec<String>> {
    chromosome
        .genes()
        .iter()
        .map(|&g| {
            pool.words
                .get(g)
                .cloned()
                .ok_or_else(|| Error::Internal(format!("gene {g} outside pool of {} words", pool.len())))
        })
        .collect()
}

/// Loaded corpus, split, dictionary, pool and the matrices a run scores
/// chromosomes with.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub corpus: Corpus,
    pub split: Split,
    pub dictionary: FrequencyDictionary,
    pub pool: KeywordPool,
    pub knn: KnnConfig,
    /// Training side for fitness evaluation.
    pub fit_train: FeatureMatrix,
    /// Scored side for fitness evaluation.
    pub fit_eval: FeatureMatrix,
    /// Full training split, used for the final report.
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

impl Experiment {
    /// Loads the corpus from `cfg.corpus_root` and prepares everything up to
    /// the GA.
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let corpus = load_corpus(&cfg.corpus_root, cfg.encoding)?;
        Self::from_corpus(corpus, cfg)
    }

    pub fn from_corpus(corpus: Corpus, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        if corpus.categories().len() < 2 {
            return Err(Error::input(format!(
                "classification needs at least 2 categories, corpus has {}",
                corpus.categories().len()
            )));
        }
        let split = split_corpus(&corpus, cfg.train_count, cfg.seed)?;
        let dictionary = match cfg.dict_scope {
            DictScope::Train => build_frequency_dictionary(&corpus, &split.train)?,
            DictScope::Full => {
                let all: Vec<&str> = corpus.ids().collect();
                build_frequency_dictionary(&corpus, &all)?
            }
        };
        let pool = select_pool(&dictionary, &cfg.pool)?;
        let train = build_feature_matrix(&corpus, &split.train, &pool.words)?;
        let test = build_feature_matrix(&corpus, &split.test, &pool.words)?;
        let (fit_train, fit_eval) = match cfg.eval_split {
            EvalSplitMode::Test => (train.clone(), test.clone()),
            EvalSplitMode::Validation => {
                let items: Vec<(&str, usize)> = split
                    .train
                    .iter()
                    .map(|id| {
                        let d = corpus.document(id).expect("split ids come from the corpus");
                        (id.as_str(), d.category.index)
                    })
                    .collect();
                let held = ((items.len() as f64) * cfg.validation_fraction).round() as usize;
                let fit_count = items.len().saturating_sub(held.max(1));
                // Distinct stream from the train/test split.
                let (fit, val) = split_labeled(&items, fit_count, cfg.seed ^ 0x9e37_79b9_7f4a_7c15)
                    .map_err(|e| e.context("validation split"))?;
                (
                    build_feature_matrix(&corpus, &fit, &pool.words)?,
                    build_feature_matrix(&corpus, &val, &pool.words)?,
                )
            }
        };
        cfg.knn.validate(fit_train.n_docs())?;
        Ok(Experiment {
            corpus,
            split,
            dictionary,
            pool,
            knn: cfg.knn,
            fit_train,
            fit_eval,
            train,
            test,
        })
    }

    /// GA fitness of a chromosome: `1 - Pr_avg` of kNN on the fitness split.
    pub fn fitness(&self, chromosome: &Chromosome) -> Result<f64> {
        let train = self.fit_train.project(chromosome.genes())?;
        let eval = self.fit_eval.project(chromosome.genes())?;
        Ok(evaluate(&train, &eval, &self.knn)?.fitness)
    }

    /// Final report: train on the training split, score the test split.
    pub fn test_report(&self, chromosome: &Chromosome) -> Result<EvalReport> {
        let train = self.train.project(chromosome.genes())?;
        let test = self.test.project(chromosome.genes())?;
        evaluate(&train, &test, &self.knn)
    }

    /// Scores an arbitrary word list (no GA) on the train/test split.
    pub fn evaluate_words(&self, words: &[String]) -> Result<EvalReport> {
        let train = build_feature_matrix(&self.corpus, &self.split.train, words)?;
        let test = build_feature_matrix(&self.corpus, &self.split.test, words)?;
        evaluate(&train, &test, &self.knn)
    }

    pub fn evolve(&self, ga: &GaConfig) -> Result<(ScoredChromosome, EvolutionTrace)> {
        let out = evolve(self.pool.len(), ga, |c| self.fitness(c))?;
        Ok((out.best, out.trace))
    }

    /// Exhaustive search over the whole pool.
    pub fn exhaustive(&self, chromosome_size: usize, cap: u128) -> Result<ScoredChromosome> {
        exhaustive_best(self.pool.len(), chromosome_size, |c| self.fitness(c), cap)
    }

    /// Writes `dictionary.csv` and `pool.csv` into `dir`.
    pub fn write_dictionary(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = OutputSet::new(dir)?;
        out.write(DICTIONARY_FILE, |f| self.dictionary.write_csv(f))?;
        out.write(POOL_FILE, |f| self.pool.write_csv(f))?;
        Ok(out.finish())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestChromosome {
    pub fitness: f64,
    pub indices: Vec<usize>,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
    pub fit_train: usize,
    pub fit_eval: usize,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub pool_size: usize,
    pub split: SplitSizes,
    pub generations: usize,
    pub best: BestChromosome,
    pub test: EvalReport,
    pub wall_time_seconds: f64,
    #[serde(skip)]
    pub trace: EvolutionTrace,
}

/// Files written under one output directory; removed again unless
/// [`OutputSet::finish`] is reached.
struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    done: bool,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            done: false,
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut fs::File) -> Result<()>,
    {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        body(&mut file)
    }

    fn finish(mut self) -> Vec<PathBuf> {
        self.done = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

impl RunReport {
    /// Writes `trace.csv`, `report.json`, `per_category.csv` and `pool.csv`.
    pub fn write_outputs(&self, dir: &Path, pool: &KeywordPool) -> Result<Vec<PathBuf>> {
        let mut out = OutputSet::new(dir)?;
        out.write(TRACE_FILE, |f| self.trace.write_csv(f))?;
        out.write(REPORT_FILE, |f| {
            serde_json::to_writer_pretty(&mut *f, self)?;
            std::io::Write::write_all(f, b"\n").map_err(|e| Error::io(dir.join(REPORT_FILE), e))
        })?;
        out.write(PER_CATEGORY_FILE, |f| self.test.write_per_category_csv(f))?;
        out.write(POOL_FILE, |f| pool.write_csv(f))?;
        Ok(out.finish())
    }
}

/// Runs the full pipeline on an already prepared experiment.
pub fn run_experiment(exp: &Experiment, cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    let ga = GaConfig {
        seed: cfg.seed,
        ..cfg.ga.clone()
    };
    let (best, trace) = exp.evolve(&ga)?;
    let test = exp.test_report(&best.chromosome)?;
    Ok(RunReport {
        config: cfg.clone(),
        pool_size: exp.pool.len(),
        split: SplitSizes {
            train: exp.train.n_docs(),
            test: exp.test.n_docs(),
            fit_train: exp.fit_train.n_docs(),
            fit_eval: exp.fit_eval.n_docs(),
        },
        generations: trace.records.len(),
        best: BestChromosome {
            fitness: best.fitness,
            indices: best.chromosome.genes().to_vec(),
            words: report_words(&exp.pool, &best.chromosome)?,
        },
        test,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// Loads, evolves, reports, and writes outputs when `output_dir` is set.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let exp = Experiment::prepare(cfg)?;
    let report = run_experiment(&exp, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        report.write_outputs(dir, &exp.pool)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRun {
    pub seed: u64,
    pub fitness: f64,
    pub pr_avg: f64,
    pub rc_avg: f64,
}

/// Contents of `summary.json` for repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub runs: Vec<RepeatRun>,
    pub fitness: MeanStd,
    pub pr_avg: MeanStd,
    pub rc_avg: MeanStd,
}

/// Runs seeds `cfg.seed .. cfg.seed + repeats`, each with its own split.
/// With an output directory, run `s` writes into `seed_<s>/` and the
/// summary goes to `summary.json`.
pub fn run_repeated(cfg: &RunConfig, repeats: usize) -> Result<RepeatSummary> {
    if repeats == 0 {
        return Err(Error::config("repeat count must be positive"));
    }
    cfg.validate()?;
    let corpus = load_corpus(&cfg.corpus_root, cfg.encoding)?;
    let mut runs = Vec::with_capacity(repeats);
    for i in 0..repeats as u64 {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(i);
        let exp = Experiment::from_corpus(corpus.clone(), &c)?;
        let report = run_experiment(&exp, &c)?;
        if let Some(dir) = &cfg.output_dir {
            report.write_outputs(&dir.join(format!("seed_{}", c.seed)), &exp.pool)?;
        }
        runs.push(RepeatRun {
            seed: c.seed,
            fitness: report.best.fitness,
            pr_avg: report.test.pr_avg,
            rc_avg: report.test.rc_avg,
        });
    }
    let col = |f: fn(&RepeatRun) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    let summary = RepeatSummary {
        fitness: col(|r| r.fitness),
        pr_avg: col(|r| r.pr_avg),
        rc_avg: col(|r| r.rc_avg),
        runs: runs.clone(),
    };
    if let Some(dir) = &cfg.output_dir {
        let path = dir.join(SUMMARY_FILE);
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_file_parsing() {
        let mut cfg = RunConfig::default();
        cfg.apply_kv(
            "# protocol\ncorpus_root = /data/fiction\ntrain_count = 300\n\
             p_max = 0.001 # upper bound\nmutation_rate = auto\nstall_generations = 25\n\
             eval_split = validation\n",
        )
        .unwrap();
        assert_eq!(cfg.corpus_root, PathBuf::from("/data/fiction"));
        assert_eq!(cfg.train_count, 300);
        assert_eq!(cfg.pool.p_max, 0.001);
        assert_eq!(cfg.ga.mutation_rate, None);
        assert_eq!(cfg.ga.stall_generations, Some(25));
        assert_eq!(cfg.eval_split, EvalSplitMode::Validation);
    }

    #[test]
    fn kv_errors_name_the_line() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_kv("seed = 1\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(cfg.apply_kv("k = many").is_err());
        assert!(cfg.apply_kv("no equals sign").is_err());
    }

    #[test]
    fn defaults_follow_the_protocol() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.ga.pop_size, 50);
        assert_eq!(cfg.ga.elite_count, 5);
        assert_eq!(cfg.ga.crossover_fraction, 0.8);
        assert_eq!(cfg.ga.chromosome_size, 30);
        assert_eq!(cfg.pool.p_max, 1e-3);
        assert_eq!(cfg.pool.max_words, 1000);
        assert_eq!(cfg.knn.k, 1);
        assert_eq!(cfg.eval_split, EvalSplitMode::Test);
        assert_eq!(cfg.dict_scope, DictScope::Train);
    }

    #[test]
    fn every_listed_key_is_settable() {
        let sample = |k: &str| match k {
            "encoding" => "utf8",
            "dict_scope" => "full",
            "eval_split" => "validation",
            "parallel" => "true",
            "corpus_root" | "output_dir" => "x",
            _ => "1",
        };
        let mut cfg = RunConfig::default();
        for k in RunConfig::KEYS {
            cfg.set(k, sample(k)).unwrap();
        }
    }

    #[test]
    fn report_words_resolves_in_order() {
        let pool = KeywordPool {
            words: vec!["alpha".into(), "beta".into()],
            source_frequencies: vec![0.2, 0.1],
        };
        let one = Chromosome::new(vec![1], 2).unwrap();
        assert_eq!(report_words(&pool, &one).unwrap(), ["beta"]);
        let full = Chromosome::new(vec![0, 1], 2).unwrap();
        assert_eq!(report_words(&pool, &full).unwrap(), pool.words);
        let bad = Chromosome::new(vec![5], 6).unwrap();
        assert!(matches!(report_words(&pool, &bad), Err(Error::Internal(_))));
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }
}
