//! Genetic search over fixed-size keyword-index subsets.
//!
//! A generation is produced by copying the elites, then filling a
//! `crossover_fraction` share of the remaining slots with scattered-crossover
//! children of tournament-selected parents and the rest with mutated copies
//! of tournament-selected parents. All randomness comes from one seeded
//! ChaCha stream drawn on the calling thread; fitness evaluation may run in
//! parallel without changing results.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};

use itertools::Itertools;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of subsets [`exhaustive_best`] will enumerate.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

/// A set of distinct pool indices.
///
/// Gene order is kept because scattered crossover is position-wise, but
/// equality and hashing use the sorted (canonical) form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chromosome {
    genes: Vec<usize>,
}

impl Chromosome {
    /// Checks distinctness and range.
    pub fn new(genes: Vec<usize>, pool_size: usize) -> Result<Self> {
        let mut seen = vec![false; pool_size];
        for &g in &genes {
            if g >= pool_size {
                return Err(Error::input(format!("gene {g} outside pool of {pool_size}")));
            }
            if std::mem::replace(&mut seen[g], true) {
                return Err(Error::input(format!("duplicate gene {g}")));
            }
        }
        Ok(Chromosome { genes })
    }

    pub fn genes(&self) -> &[usize] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn canonical(&self) -> Vec<usize> {
        let mut g = self.genes.clone();
        g.sort_unstable();
        g
    }

    pub fn contains(&self, gene: usize) -> bool {
        self.genes.contains(&gene)
    }
}

impl PartialEq for Chromosome {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for Chromosome {}

impl Hash for Chromosome {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical().hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChromosome {
    pub chromosome: Chromosome,
    pub fitness: f64,
}

/// Lower fitness first, then canonical gene order.
fn rank(a: &ScoredChromosome, b: &ScoredChromosome) -> Ordering {
    a.fitness
        .total_cmp(&b.fitness)
        .then_with(|| a.chromosome.canonical().cmp(&b.chromosome.canonical()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<ScoredChromosome>,
    pub generation: usize,
}

impl Population {
    pub fn best(&self) -> Option<&ScoredChromosome> {
        self.members.iter().min_by(|a, b| rank(a, b))
    }

    pub fn mean_fitness(&self) -> f64 {
        self.members.iter().map(|m| m.fitness).sum::<f64>() / self.members.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub chromosome_size: usize,
    pub elite_count: usize,
    pub crossover_fraction: f64,
    /// Per-gene mutation probability; `None` means `1 / chromosome_size`.
    pub mutation_rate: Option<f64>,
    pub max_generations: usize,
    /// Stop after this many generations without a new best; `None` disables.
    pub stall_generations: Option<usize>,
    /// Stop once the best fitness is at or below this value.
    pub target_fitness: Option<f64>,
    pub seed: u64,
    /// Evaluate each generation's fitness calls on the rayon pool.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_size: 50,
            chromosome_size: 30,
            elite_count: 5,
            crossover_fraction: 0.8,
            mutation_rate: None,
            max_generations: 100,
            stall_generations: None,
            target_fitness: Some(0.0),
            seed: 0,
            parallel: false,
        }
    }
}

impl GaConfig {
    pub fn effective_mutation_rate(&self) -> f64 {
        self.mutation_rate
            .unwrap_or(1.0 / self.chromosome_size.max(1) as f64)
    }

    /// Number of non-elite slots filled by crossover.
    pub fn crossover_slots(&self) -> usize {
        let open = self.pop_size.saturating_sub(self.elite_count);
        ((self.crossover_fraction * open as f64).round() as usize).min(open)
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.pop_size == 0 {
            return Err(Error::config("pop_size must be positive"));
        }
        if self.chromosome_size == 0 {
            return Err(Error::config("chromosome_size must be positive"));
        }
        if self.chromosome_size > pool_size {
            return Err(Error::config(format!(
                "chromosome_size {} exceeds pool size {pool_size}",
                self.chromosome_size
            )));
        }
        if self.elite_count >= self.pop_size {
            return Err(Error::config(format!(
                "elite_count {} must be below pop_size {}",
                self.elite_count, self.pop_size
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::config("crossover_fraction must lie in [0, 1]"));
        }
        let rate = self.effective_mutation_rate();
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::config(format!("mutation_rate {rate} must lie in (0, 1]")));
        }
        if self.max_generations == 0 {
            return Err(Error::config("max_generations must be positive"));
        }
        if self.stall_generations == Some(0) {
            return Err(Error::config("stall_generations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_chromosome: Chromosome,
}

/// One record per evaluated population; the initial population is
/// generation 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionTrace {
    pub records: Vec<GenerationRecord>,
}

impl EvolutionTrace {
    /// CSV with columns `generation,best_fitness,mean_fitness,best_genes`,
    /// genes `;`-joined in chromosome order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["generation", "best_fitness", "mean_fitness", "best_genes"])?;
        for r in &self.records {
            w.write_record([
                r.generation.to_string(),
                r.best_fitness.to_string(),
                r.mean_fitness.to_string(),
                r.best_chromosome.genes().iter().join(";"),
            ])?;
        }
        w.flush()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let bad = |what: &str| Error::input(format!("trace row {}: bad {what}", records.len() + 1));
            let genes: Vec<usize> = if field(3).is_empty() {
                Vec::new()
            } else {
                field(3)
                    .split(';')
                    .map(|g| g.parse().map_err(|_| bad("gene")))
                    .collect::<Result<_>>()?
            };
            records.push(GenerationRecord {
                generation: field(0).parse().map_err(|_| bad("generation"))?,
                best_fitness: field(1).parse().map_err(|_| bad("best_fitness"))?,
                mean_fitness: field(2).parse().map_err(|_| bad("mean_fitness"))?,
                best_chromosome: Chromosome { genes },
            });
        }
        Ok(EvolutionTrace { records })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome {
    pub best: ScoredChromosome,
    pub trace: EvolutionTrace,
}

/// `pop_size` uniform random subsets of size `chromosome_size`.
pub fn init_population<R: Rng + ?Sized>(
    pool_size: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Vec<Chromosome>> {
    if cfg.chromosome_size > pool_size {
        return Err(Error::config(format!(
            "chromosome_size {} exceeds pool size {pool_size}",
            cfg.chromosome_size
        )));
    }
    Ok((0..cfg.pop_size)
        .map(|_| Chromosome {
            genes: index::sample(rng, pool_size, cfg.chromosome_size).into_vec(),
        })
        .collect())
}

/// Binary tournament: two uniform draws with replacement, lower fitness
/// wins, ties go to the first draw.
pub fn select_parent<'a, R: Rng + ?Sized>(
    members: &'a [ScoredChromosome],
    rng: &mut R,
) -> &'a ScoredChromosome {
    let a = &members[rng.gen_range(0..members.len())];
    let b = &members[rng.gen_range(0..members.len())];
    if b.fitness < a.fitness {
        b
    } else {
        a
    }
}

/// Gene `i` from `a` where `mask[i]` is set, otherwise from `b`.
pub fn apply_mask(a: &[usize], b: &[usize], mask: &[bool]) -> Vec<usize> {
    a.iter()
        .zip(b)
        .zip(mask)
        .map(|((&x, &y), &m)| if m { x } else { y })
        .collect()
}

/// Uniform-mask crossover followed by [`repair`].
pub fn scattered_crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    pool_size: usize,
    rng: &mut R,
) -> Result<Chromosome> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "parents differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mask: Vec<bool> = (0..a.len()).map(|_| rng.gen()).collect();
    let child = apply_mask(a.genes(), b.genes(), &mask);
    repair(&child, pool_size, a.len(), rng)
}

/// Drops repeated indices (keeping first occurrences) and refills to
/// `target_size` with uniformly drawn unused indices.
pub fn repair<R: Rng + ?Sized>(
    genes: &[usize],
    pool_size: usize,
    target_size: usize,
    rng: &mut R,
) -> Result<Chromosome> {
    if target_size > pool_size {
        return Err(Error::config(format!(
            "cannot fit {target_size} distinct genes in a pool of {pool_size}"
        )));
    }
    let mut used = vec![false; pool_size];
    let mut out = Vec::with_capacity(target_size);
    for &g in genes {
        if g >= pool_size {
            return Err(Error::input(format!("gene {g} outside pool of {pool_size}")));
        }
        if out.len() < target_size && !std::mem::replace(&mut used[g], true) {
            out.push(g);
        }
    }
    while out.len() < target_size {
        let g = rng.gen_range(0..pool_size);
        if !std::mem::replace(&mut used[g], true) {
            out.push(g);
        }
    }
    Ok(Chromosome { genes: out })
}

/// Replaces each gene with probability `rate` by a uniformly drawn index not
/// currently in the chromosome. A chromosome that fills the pool is
/// returned unchanged.
pub fn mutate<R: Rng + ?Sized>(
    c: &Chromosome,
    pool_size: usize,
    rate: f64,
    rng: &mut R,
) -> Result<Chromosome> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::config(format!("mutation rate {rate} must lie in (0, 1]")));
    }
    if c.len() >= pool_size {
        return Ok(c.clone());
    }
    let mut genes = c.genes.clone();
    for i in 0..genes.len() {
        if rng.gen_bool(rate) {
            let replacement = loop {
                let g = rng.gen_range(0..pool_size);
                if !genes.contains(&g) {
                    break g;
                }
            };
            genes[i] = replacement;
        }
    }
    Ok(Chromosome { genes })
}

/// Scores `chromosomes`, consulting and filling `cache`.
fn score_all<F>(
    chromosomes: Vec<Chromosome>,
    fitness_fn: &F,
    cache: &mut HashMap<Vec<usize>, f64>,
    parallel: bool,
    generation: usize,
) -> Result<Vec<ScoredChromosome>>
where
    F: Fn(&Chromosome) -> Result<f64> + Sync,
{
    let keys: Vec<Vec<usize>> = chromosomes.iter().map(Chromosome::canonical).collect();
    let mut pending: Vec<(Vec<usize>, &Chromosome)> = Vec::new();
    for (k, c) in keys.iter().zip(&chromosomes) {
        if !cache.contains_key(k) && !pending.iter().any(|(p, _)| p == k) {
            pending.push((k.clone(), c));
        }
    }
    let eval = |c: &Chromosome| -> Result<f64> {
        let f = fitness_fn(c).map_err(|e| e.context(format!("generation {generation}")))?;
        if f.is_nan() {
            return Err(Error::evaluation(format!(
                "generation {generation}: fitness is NaN for genes {:?}",
                c.genes()
            )));
        }
        Ok(f)
    };
    let scores: Vec<Result<f64>> = if parallel {
        pending.par_iter().map(|(_, c)| eval(c)).collect()
    } else {
        pending.iter().map(|(_, c)| eval(c)).collect()
    };
    for ((k, _), s) in pending.iter().zip(scores) {
        cache.insert(k.clone(), s?);
    }
    Ok(chromosomes
        .into_iter()
        .zip(&keys)
        .map(|(chromosome, k)| ScoredChromosome {
            fitness: cache[k],
            chromosome,
        })
        .collect())
}

fn record(pop: &Population) -> GenerationRecord {
    let best = pop.best().expect("population is never empty");
    GenerationRecord {
        generation: pop.generation,
        best_fitness: best.fitness,
        mean_fitness: pop.mean_fitness(),
        best_chromosome: best.chromosome.clone(),
    }
}

/// Builds the next generation's unscored offspring plus the carried-over
/// elites.
fn breed<R: Rng + ?Sized>(
    members: &[ScoredChromosome],
    pool_size: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<(Vec<ScoredChromosome>, Vec<Chromosome>)> {
    let mut ranked: Vec<&ScoredChromosome> = members.iter().collect();
    ranked.sort_by(|a, b| rank(a, b));
    let elites: Vec<ScoredChromosome> = ranked.into_iter().take(cfg.elite_count).cloned().collect();

    let n_cross = cfg.crossover_slots();
    let n_mut = cfg.pop_size - cfg.elite_count - n_cross;
    let rate = cfg.effective_mutation_rate();
    let mut children = Vec::with_capacity(n_cross + n_mut);
    for _ in 0..n_cross {
        let a = select_parent(members, rng);
        let b = select_parent(members, rng);
        children.push(scattered_crossover(&a.chromosome, &b.chromosome, pool_size, rng)?);
    }
    for _ in 0..n_mut {
        let p = select_parent(members, rng);
        children.push(mutate(&p.chromosome, pool_size, rate, rng)?);
    }
    Ok((elites, children))
}

/// Runs the GA over chromosomes of `cfg.chromosome_size` indices into a
/// pool of `pool_size` words, minimising `fitness_fn`.
///
/// Stops after `max_generations` populations, after `stall_generations`
/// generations without a new best, or once the best fitness reaches
/// `target_fitness`. Returns the best chromosome ever scored and one trace
/// record per population.
pub fn evolve<F>(pool_size: usize, cfg: &GaConfig, fitness_fn: F) -> Result<EvolutionOutcome>
where
    F: Fn(&Chromosome) -> Result<f64> + Sync,
{
    cfg.validate(pool_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = HashMap::new();

    let initial = init_population(pool_size, cfg, &mut rng)?;
    let mut pop = Population {
        members: score_all(initial, &fitness_fn, &mut cache, cfg.parallel, 1)?,
        generation: 1,
    };
    let mut trace = EvolutionTrace::default();
    trace.records.push(record(&pop));
    let mut best = pop.best().cloned().expect("population is never empty");
    let mut stalled = 0usize;

    loop {
        if cfg.target_fitness.is_some_and(|t| best.fitness <= t)
            || pop.generation >= cfg.max_generations
            || cfg.stall_generations.is_some_and(|s| stalled >= s)
        {
            break;
        }
        let generation = pop.generation + 1;
        let (mut members, children) = breed(&pop.members, pool_size, cfg, &mut rng)?;
        members.extend(score_all(
            children,
            &fitness_fn,
            &mut cache,
            cfg.parallel,
            generation,
        )?);
        debug_assert_eq!(members.len(), cfg.pop_size);
        pop = Population { members, generation };
        let rec = record(&pop);
        log::debug!(
            "generation {generation}: best {:.6} mean {:.6}",
            rec.best_fitness,
            rec.mean_fitness
        );
        if rec.best_fitness < best.fitness {
            best = ScoredChromosome {
                chromosome: rec.best_chromosome.clone(),
                fitness: rec.best_fitness,
            };
            stalled = 0;
        } else {
            stalled += 1;
        }
        trace.records.push(rec);
    }

    Ok(EvolutionOutcome { best, trace })
}

/// `n choose k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Scores every `chromosome_size`-subset of the pool in lexicographic order
/// and returns the lowest; ties keep the lexicographically first subset.
pub fn exhaustive_best<F>(
    pool_size: usize,
    chromosome_size: usize,
    fitness_fn: F,
    cap: u128,
) -> Result<ScoredChromosome>
where
    F: Fn(&Chromosome) -> Result<f64>,
{
    if chromosome_size == 0 || chromosome_size > pool_size {
        return Err(Error::config(format!(
            "cannot enumerate {chromosome_size}-subsets of a pool of {pool_size}"
        )));
    }
    let total = binomial(pool_size, chromosome_size);
    if total > cap {
        return Err(Error::config(format!(
            "C({pool_size}, {chromosome_size}) = {total} subsets exceeds the cap of {cap}"
        )));
    }
    let mut best: Option<ScoredChromosome> = None;
    for genes in (0..pool_size).combinations(chromosome_size) {
        let chromosome = Chromosome { genes };
        let fitness = fitness_fn(&chromosome)?;
        if best.as_ref().is_none_or(|b| fitness < b.fitness) {
            best = Some(ScoredChromosome { chromosome, fitness });
        }
    }
    best.ok_or_else(|| Error::Internal("no subsets enumerated".into()))
}
