use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kwsel::pipeline::{self, BestChromosome, Experiment, RunConfig};
use kwsel::synth::{make_synthetic_corpus, SynthConfig};
use kwsel::{report_words, Error};

#[derive(Parser)]
#[command(
    name = "kwsel",
    version,
    about = "Genetic keyword selection for kNN authorship classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: dictionary, pool, GA, final test report.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Repeat over consecutive seeds and report mean ± stddev.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Export the frequency dictionary and the keyword pool.
    Dict {
        #[command(flatten)]
        run: RunArgs,
        /// Also dump the loaded corpus as JSON lines.
        #[arg(long)]
        corpus_jsonl: Option<PathBuf>,
    },
    /// Score a given word list with kNN, without running the GA.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated keywords.
        #[arg(long, value_delimiter = ',', required_unless_present = "words_file")]
        words: Vec<String>,
        /// File with whitespace- or comma-separated keywords.
        #[arg(long)]
        words_file: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted author markers.
    Synth(SynthArgs),
    /// Exhaustive search over every subset of a small pool.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Maximum number of subsets to enumerate.
        #[arg(long, default_value_t = kwsel::ga::DEFAULT_EXHAUSTIVE_CAP)]
        cap: u128,
    },
}

/// Flags mirroring the config-file keys; flags override the file.
#[derive(Args, Default)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus root: one subdirectory per author.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Text encoding: utf8 or latin1.
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Documents the dictionary is built from: train or full.
    #[arg(long)]
    dict_scope: Option<String>,
    #[arg(long)]
    p_min: Option<f64>,
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    max_words: Option<usize>,
    /// Neighbours consulted by the classifier (default 1, a guess).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    chromosome_size: Option<usize>,
    #[arg(long)]
    elite_count: Option<usize>,
    #[arg(long)]
    crossover_fraction: Option<f64>,
    /// Per-gene mutation probability, or `auto` for 1/chromosome_size.
    #[arg(long)]
    mutation_rate: Option<String>,
    /// Generation budget (default 100, a guess).
    #[arg(long)]
    max_generations: Option<usize>,
    /// Stop after this many generations without improvement, or `off`.
    #[arg(long)]
    stall_generations: Option<String>,
    /// Stop once best fitness is at or below this, or `off`.
    #[arg(long)]
    target_fitness: Option<String>,
    /// Evaluate fitness in parallel (results are unchanged).
    #[arg(long)]
    parallel: bool,
    /// Split the GA scores on: test, or validation (carved from train).
    #[arg(long)]
    eval_split: Option<String>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn to_config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_kv_file(path)?,
            None => RunConfig::default(),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<(), Error> {
            match value {
                Some(v) => cfg.set(key, &v),
                None => Ok(()),
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let num = |v: Option<usize>| v.map(|v| v.to_string());
        let real = |v: Option<f64>| v.map(|v| v.to_string());

        set("corpus_root", path(&self.corpus))?;
        set("encoding", self.encoding.clone())?;
        set("train_count", num(self.train_count))?;
        set("seed", self.seed.map(|s| s.to_string()))?;
        set("dict_scope", self.dict_scope.clone())?;
        set("p_min", real(self.p_min))?;
        set("p_max", real(self.p_max))?;
        set("max_words", num(self.max_words))?;
        set("k", num(self.k))?;
        set("pop_size", num(self.pop_size))?;
        set("chromosome_size", num(self.chromosome_size))?;
        set("elite_count", num(self.elite_count))?;
        set("crossover_fraction", real(self.crossover_fraction))?;
        set("mutation_rate", self.mutation_rate.clone())?;
        set("max_generations", num(self.max_generations))?;
        set("stall_generations", self.stall_generations.clone())?;
        set("target_fitness", self.target_fitness.clone())?;
        set("parallel", self.parallel.then(|| "true".to_string()))?;
        set("eval_split", self.eval_split.clone())?;
        set("validation_fraction", real(self.validation_fraction))?;
        set("output_dir", path(&self.output_dir))?;

        if cfg.corpus_root.as_os_str().is_empty() {
            return Err(Error::config(
                "no corpus given (use --corpus or corpus_root in --config)",
            ));
        }
        if cfg.train_count == 0 {
            return Err(Error::config("no train_count given"));
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write the corpus into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    authors: usize,
    #[arg(long, default_value_t = 10)]
    docs_per_author: usize,
    #[arg(long, default_value_t = 400)]
    tokens_per_doc: usize,
    #[arg(long, default_value_t = 3)]
    markers_per_author: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    background_vocab: Option<usize>,
    #[arg(long)]
    marker_rate: Option<f64>,
    #[arg(long)]
    marker_leak: Option<f64>,
    #[arg(long)]
    style_spread: Option<f64>,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { run, repeat } => {
            let cfg = run.to_config()?;
            if repeat > 1 {
                print_json(&pipeline::run_repeated(&cfg, repeat)?)
            } else {
                let report = pipeline::run(&cfg)?;
                print_json(&report)
            }
        }
        Command::Dict { run, corpus_jsonl } => {
            let cfg = run.to_config()?;
            let exp = Experiment::prepare(&cfg)?;
            if let Some(path) = corpus_jsonl {
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                exp.corpus
                    .write_jsonl(std::io::BufWriter::new(file))
                    .map_err(|e| Error::io(&path, e))?;
            }
            match &cfg.output_dir {
                Some(dir) => {
                    for p in exp.write_dictionary(dir)? {
                        println!("{}", p.display());
                    }
                }
                None => exp.pool.write_csv(std::io::stdout())?,
            }
            Ok(())
        }
        Command::Eval {
            run,
            mut words,
            words_file,
        } => {
            let cfg = run.to_config()?;
            if let Some(path) = words_file {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                words.extend(
                    text.split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|w| !w.is_empty())
                        .map(str::to_lowercase),
                );
            }
            let exp = Experiment::prepare(&cfg)?;
            let report = exp.evaluate_words(&words)?;
            if let Some(dir) = &cfg.output_dir {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join(pipeline::PER_CATEGORY_FILE);
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                report.write_per_category_csv(file)?;
            }
            print_json(&report)
        }
        Command::Synth(args) => {
            let mut cfg = SynthConfig::new(
                args.authors,
                args.docs_per_author,
                args.tokens_per_doc,
                args.markers_per_author,
                args.seed,
            );
            if let Some(v) = args.background_vocab {
                cfg.background_vocab = v;
            }
            if let Some(v) = args.marker_rate {
                cfg.marker_rate = v;
            }
            if let Some(v) = args.marker_leak {
                cfg.marker_leak = v;
            }
            if let Some(v) = args.style_spread {
                cfg.style_spread = v;
            }
            let manifest = make_synthetic_corpus(&args.out, &cfg)?;
            let docs: usize = manifest.authors.iter().map(|a| a.documents.len()).sum();
            println!(
                "wrote {docs} documents for {} authors to {}",
                manifest.authors.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Oracle { run, cap } => {
            let cfg = run.to_config()?;
            let exp = Experiment::prepare(&cfg)?;
            let best = exp.exhaustive(cfg.ga.chromosome_size, cap)?;
            print_json(&BestChromosome {
                fitness: best.fitness,
                indices: best.chromosome.genes().to_vec(),
                words: report_words(&exp.pool, &best.chromosome)?,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let message = serde_json::to_string(&e.to_string()).unwrap_or_default();
            eprintln!("error kind={} code={code} message={message}", e.kind());
            eprintln!("kwsel: {e}");
            ExitCode::from(code as u8)
        }
    }
}
