use std::fs;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use kwsel::ga::GaConfig;
use kwsel::knn::KnnConfig;
use kwsel::{
    evaluate, load_corpus, make_synthetic_corpus, tokenize, Chromosome, Experiment, PoolConfig, RunConfig,
    SynthConfig, TextEncoding,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Fixture {
    dir: tempfile::TempDir,
    exp: Experiment,
    sample_text: String,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_synthetic_corpus(dir.path(), &SynthConfig::new(6, 40, 400, 3, 1)).unwrap();
    let sample_text = fs::read_to_string(dir.path().join(&manifest.authors[0].documents[0])).unwrap();
    let mut cfg = RunConfig {
        corpus_root: dir.path().to_path_buf(),
        train_count: 160,
        seed: 1,
        ..RunConfig::default()
    };
    cfg.pool = PoolConfig {
        p_min: 0.0,
        p_max: 0.002,
        max_words: 1000,
    };
    let exp = Experiment::prepare(&cfg).unwrap();
    Fixture {
        dir,
        exp,
        sample_text,
    }
}

fn benches(c: &mut Criterion) {
    let f = fixture();
    let pool = f.exp.pool.len();

    c.bench_function("tokenize_400_token_document", |b| {
        b.iter(|| tokenize(black_box(&f.sample_text)))
    });

    c.bench_function("load_corpus_240_documents", |b| {
        b.iter(|| load_corpus(black_box(f.dir.path()), TextEncoding::Utf8).unwrap())
    });

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let genes = sample(&mut rng, pool, 18).into_vec();
    let chromosome = Chromosome::new(genes.clone(), pool).unwrap();
    let train = f.exp.fit_train.project(&genes).unwrap();
    let test = f.exp.fit_eval.project(&genes).unwrap();
    c.bench_function("knn_evaluate_160x80_18_keywords", |b| {
        b.iter(|| evaluate(black_box(&train), black_box(&test), &KnnConfig::default()).unwrap())
    });
    c.bench_function("fitness_with_projection", |b| {
        b.iter(|| f.exp.fitness(black_box(&chromosome)).unwrap())
    });

    let mut group = c.benchmark_group("evolve_10_generations");
    group.sample_size(10);
    for parallel in [false, true] {
        let ga = GaConfig {
            chromosome_size: 18,
            max_generations: 10,
            target_fitness: None,
            parallel,
            ..GaConfig::default()
        };
        let name = if parallel { "parallel" } else { "serial" };
        group.bench_function(name, |b| {
            b.iter_batched(
                || ga.clone(),
                |ga| f.exp.evolve(&ga).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
