//! Genetic selection of keyword subsets for authorship classification.
//!
//! The pipeline builds a corpus frequency dictionary, keeps the words whose
//! relative frequency falls in a half-open window as the gene pool, and runs
//! a genetic algorithm over fixed-size subsets of that pool. A subset's
//! fitness is one minus the category-averaged precision of a k-nearest
//! neighbours classifier that sees documents only through the relative
//! frequencies of the subset's words.
//!
//! Modules follow the data flow: [`corpus`] → [`freqdict`] →
//! [`vectorspace`] → [`knn`] → [`ga`], wired together by [`pipeline`].
//! [`synth`] generates labeled test corpora with planted marker words.

pub mod corpus;
pub mod error;
pub mod freqdict;
pub mod ga;
pub mod knn;
pub mod pipeline;
pub mod synth;
pub mod vectorspace;

pub use corpus::{load_corpus, split_corpus, tokenize, CategoryId, Corpus, Document, Split, TextEncoding};
pub use error::{Error, Result};
pub use freqdict::{build_frequency_dictionary, select_pool, FrequencyDictionary, KeywordPool, PoolConfig};
pub use ga::{
    evolve, exhaustive_best, Chromosome, EvolutionOutcome, EvolutionTrace, GaConfig, GenerationRecord,
    Population, ScoredChromosome,
};
pub use knn::{
    classify, euclidean_distance, evaluate, fitness_from_report, ConfusionCounts, EvalReport, KnnConfig,
};
pub use pipeline::{report_words, run, DictScope, EvalSplitMode, Experiment, RunConfig, RunReport};
pub use synth::{make_synthetic_corpus, SynthConfig, SynthManifest};
pub use vectorspace::{build_feature_matrix, document_frequency, FeatureMatrix};
